//! Persistence: connections in a site-major binary layout behind a JSON
//! header line, the Sobolev basis cache, and small CSV helpers.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::{Connection, OneForm};
use crate::lattice::LatticeTorus;
use crate::sobolev::{FourierMode, SobolevBasis, SobolevParams, TIE_BREAK_RULE};

pub const CONNECTION_MAGIC: &str = "holonomy-lab/connection";
pub const BASIS_MAGIC: &str = "holonomy-lab/sobolev-basis";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionHeader {
    pub format: String,
    pub version: u32,
    /// Representation dimension `n` of `su(n)`.
    pub n: usize,
    pub sites_per_axis: usize,
    pub box_length: f64,
    pub axis_order: String,
    pub layout: String,
    pub values: usize,
}

/// Header line, then `(re, im)` little-endian `f64` pairs ordered by site,
/// then axis, then matrix entry (row major).
pub fn write_connection(w: &mut impl Write, connection: &Connection) -> Result<()> {
    let form = connection.form();
    let torus = form.torus();
    let header = ConnectionHeader {
        format: CONNECTION_MAGIC.into(),
        version: FORMAT_VERSION,
        n: form.rep_dim(),
        sites_per_axis: torus.sites_per_axis(),
        box_length: torus.box_length(),
        axis_order: "site-major (z fastest), axis x,y,z, entry row-major".into(),
        layout: "f64-le re,im".into(),
        values: form.data().len(),
    };
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(form.data().len() * 16);
    for z in form.data() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_connection(r: impl Read) -> Result<Connection> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: ConnectionHeader = serde_json::from_str(line.trim_end())?;
    if header.format != CONNECTION_MAGIC || header.version != FORMAT_VERSION {
        return Err(Error::Format(format!("unexpected connection format {} v{}", header.format, header.version)));
    }
    let torus = LatticeTorus::new(header.sites_per_axis, header.box_length)?;
    let expected = torus.site_count() * 3 * header.n * header.n;
    if header.values != expected {
        return Err(Error::Format(format!("header lists {} values, lattice needs {expected}", header.values)));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != expected * 16 {
        return Err(Error::Format(format!("payload has {} bytes, expected {}", bytes.len(), expected * 16)));
    }
    let data = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    Connection::from_form(OneForm::from_data(&torus, header.n, data)?)
}

pub fn save_connection(path: &Path, connection: &Connection) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_connection(&mut f, connection)?;
    f.flush()?;
    Ok(())
}

pub fn load_connection(path: &Path) -> Result<Connection> {
    read_connection(std::fs::File::open(path)?)
}

/// Cached basis: labels and eigenvalues; the vectors are rebuilt from the
/// labels and checked against them on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisCache {
    pub format: String,
    pub version: u32,
    pub sites_per_axis: usize,
    pub box_length: f64,
    pub rep_dim: usize,
    pub params: SobolevParams,
    pub tie_break: String,
    pub modes: Vec<FourierMode>,
}

impl BasisCache {
    pub fn from_basis(basis: &SobolevBasis) -> Self {
        Self {
            format: BASIS_MAGIC.into(),
            version: FORMAT_VERSION,
            sites_per_axis: basis.torus().sites_per_axis(),
            box_length: basis.torus().box_length(),
            rep_dim: basis.rep_dim(),
            params: *basis.params(),
            tie_break: TIE_BREAK_RULE.into(),
            modes: basis.modes().to_vec(),
        }
    }

    pub fn into_basis(self) -> Result<SobolevBasis> {
        if self.format != BASIS_MAGIC || self.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unexpected basis cache format {} v{}", self.format, self.version)));
        }
        if self.tie_break != TIE_BREAK_RULE {
            return Err(Error::Format("basis cache was written with a different tie-break rule".into()));
        }
        let torus = LatticeTorus::new(self.sites_per_axis, self.box_length)?;
        SobolevBasis::from_modes(&torus, self.rep_dim, &self.params, self.modes)
    }
}

pub fn save_basis(path: &Path, basis: &SobolevBasis) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(f, &BasisCache::from_basis(basis))?;
    Ok(())
}

pub fn load_basis(path: &Path) -> Result<SobolevBasis> {
    let cache: BasisCache = serde_json::from_reader(BufReader::new(std::fs::File::open(path)?))?;
    cache.into_basis()
}

/// Shortest representation that reads back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// In-memory CSV with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    columns: Vec<String>,
    body: String,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            body: String::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn push(&mut self, cells: &[String]) -> Result<()> {
        if cells.len() != self.columns.len() {
            return Err(Error::ShapeMismatch(format!("{} cells for {} columns", cells.len(), self.columns.len())));
        }
        self.body.push_str(&cells.join(","));
        self.body.push('\n');
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        s + &self.body
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

/// Whitespace-separated columns with a `#` comment header, for gnuplot.
pub fn render_dat(comment: &str, rows: &[Vec<f64>]) -> String {
    let mut s = String::new();
    for line in comment.lines() {
        let _ = writeln!(s, "# {line}");
    }
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
        let _ = writeln!(s, "{}", cells.join(" "));
    }
    s
}
