//! Acceptance criteria. Runs as a plain binary so the PASS/FAIL lines are
//! always printed; exits non-zero when any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use holonomy_lab::bott::{
    assemble_bott_dirac, commutator_growth_profile, compressed_square_spectrum, embedded_interior_indices, interior_square_spectrum,
    last_decade_slope, DEFAULT_MAX_DIM,
};
use holonomy_lab::fock::{exterior_power_exact, FermionOp, FermionState};
use holonomy_lab::fock_rep::{fock_action, one_particle_action, sample_sector_state, sector_norm_bound, FockYmSpace, FockYmState, Weighting};
use holonomy_lab::gauge::{holonomy, CMat, Connection, FlowTransport, LatticeSpinor, LieBasis, Multiplier, OneForm, TransportOptions};
use holonomy_lab::harness::{run_and_write, ExperimentConfig, Selection};
use holonomy_lab::lattice::{integrate_flow, FlowPath, LatticeTorus, VectorField};
use holonomy_lab::operator::{spectrum, SpectrumConfig};
use holonomy_lab::oscillator::{embed_vacuum, mode_inner, BosonicState, ModeParams};
use holonomy_lab::qhd::{HolonomyDiffeo, WeylReference, YmSpace, YmState};
use holonomy_lab::sobolev::{apply_componentwise, build_sobolev_basis, hodge_laplacian, sobolev_norm, SobolevParams, Trig};
use nalgebra::{DMatrix, SVD};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<Vec<String>, String>;

struct Checks {
    notes: Vec<String>,
    failures: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self {
            notes: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn at_most(&mut self, what: &str, value: f64, tol: f64) {
        let line = format!("{what} = {value:.3e} (<= {tol:e})");
        if value <= tol {
            self.notes.push(line);
        } else {
            self.failures.push(line);
        }
    }

    fn holds(&mut self, what: &str, ok: bool) {
        if ok {
            self.notes.push(what.to_string());
        } else {
            self.failures.push(what.to_string());
        }
    }

    fn finish(self) -> Outcome {
        if self.failures.is_empty() {
            Ok(self.notes)
        } else {
            Err(self.failures.join("; "))
        }
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn ac1_car_relations() -> Outcome {
    let start = Instant::now();
    let mut ch = Checks::new();
    for n in [1usize, 4, 12] {
        let ext: Vec<FermionOp> = (0..n).map(|i| FermionOp::ext(n, i)).collect::<Result<_, _>>().map_err(err)?;
        let int: Vec<FermionOp> = (0..n).map(|i| FermionOp::int(n, i)).collect::<Result<_, _>>().map_err(err)?;
        let cs: Vec<FermionOp> = (0..n).map(|i| FermionOp::c(n, i)).collect::<Result<_, _>>().map_err(err)?;
        let cb: Vec<FermionOp> = (0..n).map(|i| FermionOp::cbar(n, i)).collect::<Result<_, _>>().map_err(err)?;
        let mut bad = 0;
        for i in 0..n {
            for j in 0..n {
                let d = i64::from(i == j);
                let ac = |a: &FermionOp, b: &FermionOp| a.anticommutator(b).map_err(err);
                bad += usize::from(!ac(&ext[i], &int[j])?.is_scalar(d));
                bad += usize::from(!ac(&ext[i], &ext[j])?.is_scalar(0));
                bad += usize::from(!ac(&cs[i], &cb[j])?.is_scalar(0));
                bad += usize::from(!ac(&cs[i], &cs[j])?.is_scalar(2 * d));
                bad += usize::from(!ac(&cb[i], &cb[j])?.is_scalar(-2 * d));
            }
        }
        ch.holds(&format!("n={n}: all exact anticommutators scalar as required"), bad == 0);
    }
    let secs = start.elapsed().as_secs_f64();
    ch.holds(&format!("runtime {secs:.2}s < 1s"), secs < 1.0);
    ch.finish()
}

/// `Σ 2τ₂ s_i (k_i + f_i)` over levels `k_i ≤ K - 3`, ascending.
fn oracle_multiset(s: &[f64], tau2: f64, cutoff: usize, count: usize) -> Vec<f64> {
    let mut vals = vec![0.0f64];
    for &si in s {
        let mut next = Vec::new();
        for &v in &vals {
            for k in 0..cutoff - 2 {
                for f in 0..2 {
                    next.push(v + 2.0 * tau2 * si * (k + f) as f64);
                }
            }
        }
        next.sort_by(f64::total_cmp);
        next.truncate(count);
        vals = next;
    }
    vals
}

fn ac2_bott_spectrum() -> Outcome {
    let start = Instant::now();
    let mut ch = Checks::new();
    let cfg = SpectrumConfig::default();
    let mut worst = 0.0f64;
    let mut asym = 0.0f64;
    let mut kernels_ok = true;
    for (n, k) in [(1usize, 16usize), (2, 12), (3, 8)] {
        for s in [vec![1.0; n], (1..=n).map(|i| i as f64).collect::<Vec<_>>()] {
            for tau2 in [0.5, 1.0] {
                let p = ModeParams::new(tau2, s.clone(), k).map_err(err)?;
                let got = interior_square_spectrum(&p, 8, DEFAULT_MAX_DIM, &cfg).map_err(err)?;
                let want = oracle_multiset(&s, tau2, k, 8);
                if got.len() != 8 {
                    return Err(format!("only {} eigenvalues for n={n} K={k}", got.len()));
                }
                worst = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
                kernels_ok &= got.iter().filter(|e| e.abs() < 1e-9).count() == 1;
                let b = assemble_bott_dirac(&p, DEFAULT_MAX_DIM).map_err(err)?;
                let ev = spectrum(&b, b.dim(), &cfg).map_err(err)?;
                asym = ev.iter().zip(ev.iter().rev()).map(|(a, b)| (a + b).abs()).fold(asym, f64::max);
            }
        }
    }
    ch.at_most("lowest-8 deviation from closed form", worst, 1e-9);
    ch.holds("interior kernel one-dimensional in every case", kernels_ok);
    ch.at_most("spectral asymmetry of B", asym, 1e-10);
    let secs = start.elapsed().as_secs_f64();
    ch.holds(&format!("runtime {secs:.1}s < 30s"), secs < 30.0);
    ch.finish()
}

fn ac3_embedding() -> Outcome {
    let mut ch = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut norm_dev = 0.0f64;
    let mut inner_dev = 0.0f64;
    for (n, k) in [(1usize, 16usize), (2, 12), (3, 8)] {
        let mut prev = BosonicState::random(n, k, &mut rng);
        for _ in 0..100 {
            let s: f64 = 0.25 + 2.0 * rng.random::<f64>();
            let raw = BosonicState::random(n, k, &mut rng);
            let eta = BosonicState::from_amplitudes(n, k, raw.amplitudes().iter().map(|a| a * s).collect()).map_err(err)?;
            let e = embed_vacuum(&eta);
            norm_dev = norm_dev.max((e.norm() - eta.norm()).abs());
            let before = mode_inner(&prev, &eta).map_err(err)?;
            let after = mode_inner(&embed_vacuum(&prev), &e).map_err(err)?;
            inner_dev = inner_dev.max((before - after).norm());
            prev = eta;
        }
    }
    ch.at_most("norm change under embedding", norm_dev, 1e-14);
    ch.at_most("inner product change under embedding", inner_dev, 1e-14);
    let cfg = SpectrumConfig::default();
    let mut worst = 0.0f64;
    for (n, k) in [(1usize, 16usize), (2, 12), (2, 8)] {
        for s in [vec![1.0; n + 1], (1..=n + 1).map(|i| i as f64).collect::<Vec<_>>()] {
            let upper = ModeParams::new(1.0, s.clone(), k).map_err(err)?;
            let lower = upper.truncated(n).map_err(err)?;
            let idx = embedded_interior_indices(&upper).map_err(err)?;
            let a = compressed_square_spectrum(&upper, &idx, 8, DEFAULT_MAX_DIM, &cfg).map_err(err)?;
            let b = interior_square_spectrum(&lower, 8, DEFAULT_MAX_DIM, &cfg).map_err(err)?;
            let oracle = oracle_multiset(&s[..n], 1.0, k, 8);
            worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
            worst = a.iter().zip(&oracle).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
        }
    }
    ch.at_most("embedded B² spectrum vs lower B²", worst, 1e-9);
    ch.finish()
}

fn ac4_sobolev() -> Outcome {
    let start = Instant::now();
    let mut ch = Checks::new();
    let torus = LatticeTorus::new(8, 1.0).map_err(err)?;
    let h = torus.spacing();
    let lie = LieBasis::su(2).map_err(err)?;
    let full = build_sobolev_basis(&torus, 2, &SobolevParams::new(1.0, 2.0).map_err(err)?, 4608).map_err(err)?;
    let mut symbol = 0.0f64;
    let mut harmonic = 0.0f64;
    for m in full.modes() {
        let oracle: f64 = m.k.iter().map(|&kj| (2.0 / h * (PI * kj as f64 / 8.0).sin()).powi(2)).sum();
        symbol = symbol.max((m.eigenvalue - oracle).abs() / oracle.max(1.0));
        if m.k == [0, 0, 0] {
            harmonic = harmonic.max(m.eigenvalue.abs());
        }
    }
    let n = 600;
    let coords: Vec<Vec<f64>> = (0..n).map(|i| full.eigenform(i).to_real_coords(&lie)).collect();
    let h3 = torus.volume_element();
    let mut gram = 0.0f64;
    for a in 0..n {
        for b in a..n {
            let g: f64 = coords[a].iter().zip(&coords[b]).map(|(x, y)| x * y).sum::<f64>() * h3;
            gram = gram.max((g - if a == b { 1.0 } else { 0.0 }).abs());
        }
    }
    let lap = hodge_laplacian(&torus, 2).map_err(err)?;
    let mut eig = 0.0f64;
    let mut snorm = 0.0f64;
    for (tau1, sigma) in [(1.0, 2.0), (0.5, 1.5)] {
        let params = SobolevParams::new(tau1, sigma).map_err(err)?;
        for i in (0..full.len()).step_by(37).chain(0..9) {
            let e = full.eigenform(i);
            let lam = full.modes()[i].eigenvalue;
            let de = apply_componentwise(&lap, &e).map_err(err)?;
            let r = de.axpy(-lam, &e).map_err(err)?.l2_norm() / lam.max(1.0);
            if full.modes()[i].k == [0, 0, 0] {
                harmonic = harmonic.max(de.l2_norm());
            }
            eig = eig.max(r);
            let w = 1.0 + tau1 * lam.powf(sigma);
            let sn = sobolev_norm(&e, &params).map_err(err)?;
            let l2 = e.l2_norm();
            snorm = snorm.max((sn * sn - w * w * l2 * l2).abs() / (w * w * l2 * l2));
        }
    }
    ch.at_most("Gram deviation (600 modes)", gram, 1e-10);
    ch.holds(&format!("harmonic eigenvalues and Laplacian images exactly zero ({harmonic:e})"), harmonic == 0.0);
    ch.at_most("eigenvalue vs discrete symbol (relative)", symbol, 1e-12);
    ch.at_most("Laplacian eigen-equation residual (relative)", eig, 1e-12);
    ch.at_most("Sobolev norm vs (1+τ₁λ^σ)² L² norm (relative)", snorm, 1e-10);
    let secs = start.elapsed().as_secs_f64();
    ch.holds(&format!("runtime {secs:.1}s < 60s"), secs < 60.0);
    ch.finish()
}

fn sigma3() -> CMat {
    CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

fn smooth_connection(torus: &LatticeTorus, lie: &LieBasis) -> Result<Connection, String> {
    let form = OneForm::from_fn(torus, lie.rep_dim(), |p, axis| {
        let mut m = CMat::zeros(lie.rep_dim(), lie.rep_dim());
        for a in 0..lie.dim() {
            let phase = 2.0 * PI * (p[(axis + a) % 3] - 0.3 * p[(axis + 2) % 3]) + 0.7 * a as f64;
            m += lie.generator(a) * c(0.9 * phase.cos() / (1 + a) as f64, 0.0);
        }
        m
    });
    Connection::from_form(form).map_err(err)
}

fn wavy_spinor(torus: &LatticeTorus) -> LatticeSpinor {
    LatticeSpinor::from_fn(torus, 2, |p| {
        vec![
            c(1.0 + 0.7 * (2.0 * PI * p[0]).cos(), 0.2 * (2.0 * PI * p[1]).sin()),
            c(0.3, 0.5 + 0.4 * (2.0 * PI * (p[0] + p[2])).sin()),
        ]
    })
}

fn ac5_holonomy() -> Outcome {
    let mut ch = Checks::new();
    let torus = LatticeTorus::new(8, 1.0).map_err(err)?;
    let lie = LieBasis::su(2).map_err(err)?;
    let field = VectorField::sampled(&torus, |p| [0.4 * (2.0 * PI * p[1]).cos(), -0.25, 0.3 * (2.0 * PI * p[2]).sin()]);
    let tr = FlowTransport::new(&field, 1.3, 24, false).map_err(err)?;
    let id = CMat::identity(2, 2);
    let zero = tr
        .holonomies(&Connection::zero(&torus, 2))
        .iter()
        .map(|h| (&h.0 - &id).norm())
        .fold(0.0, f64::max);
    ch.at_most("zero-connection transport vs identity", zero, 1e-14);

    let theta = 0.9;
    let z = CMat::zeros(2, 2);
    let conn = Connection::constant(&torus, &[sigma3() * c(0.0, theta), z.clone(), z]).map_err(err)?;
    let path = FlowPath::straight(&torus, [0.1, 0.2, 0.3], [1.0, 0.0, 0.0], 1000).map_err(err)?;
    let hol = holonomy(&path, &conn);
    let l = torus.box_length();
    let mut expect = CMat::zeros(2, 2);
    expect[(0, 0)] = c((theta * l).cos(), -(theta * l).sin());
    expect[(1, 1)] = c((theta * l).cos(), (theta * l).sin());
    ch.at_most("abelian loop holonomy vs exp(-iθLσ₃)", (hol.0 - expect).norm(), 1e-8);

    let smooth = smooth_connection(&torus, &lie)?;
    let mut rev = 0.0f64;
    for site in [0, 77, 300, 511] {
        let p = integrate_flow(&torus, &field, torus.site_position(site), 1.3, 24).map_err(err)?;
        let a = holonomy(&p, &smooth);
        let b = holonomy(&p.reversed(&torus), &smooth);
        rev = rev.max((&a.0 * &b.0 - &id).norm());
    }
    ch.at_most("path reversal gives the inverse", rev, 1e-10);

    let big = LatticeTorus::new(16, 1.0).map_err(err)?;
    let hb = big.spacing();
    let x = VectorField::constant(&big, [2.0 * hb, -hb, 5.0 * hb]);
    let conn16 = smooth_connection(&big, &lie)?;
    let psi = wavy_spinor(&big);
    let phi = LatticeSpinor::from_fn(&big, 2, |p| vec![c((2.0 * PI * p[2]).sin(), 1.0), c(p[0], -0.5)]);
    let opts = TransportOptions { steps: 16, unitarize: true };
    let ex = |s: &LatticeSpinor| holonomy_lab::gauge::apply_holonomy_diffeo(&Multiplier::One, &x, 1.0, &conn16, s, opts).map_err(err);
    let a = ex(&psi)?;
    let b = ex(&phi)?;
    let unit = ((a.norm() - psi.norm()).abs() / psi.norm()).max((a.inner(&b) - psi.inner(&phi)).norm() / (psi.norm() * phi.norm()));
    ch.at_most("unitarity of e^X for constant X on N=16", unit, 1e-6);

    let control = VectorField::sampled(&torus, |p| [0.15 * (2.0 * PI * p[0]).sin(), 0.0, 0.0]);
    let psi8 = wavy_spinor(&torus);
    let raw = holonomy_lab::gauge::apply_holonomy_diffeo(
        &Multiplier::One,
        &control,
        1.0,
        &smooth,
        &psi8,
        TransportOptions { steps: 16, unitarize: false },
    )
    .map_err(err)?;
    let drift = (raw.norm() - psi8.norm()).abs() / psi8.norm();
    ch.holds(&format!("negative control: drift {drift:.3e} > 1e-3 without Jacobian"), drift > 1e-3);
    ch.finish()
}

struct Weyl {
    lattice: f64,
    closed: f64,
    signs: [i32; 2],
}

fn weyl_probe(sites: usize, k: [i64; 3], omega: f64, cutoff: usize) -> Result<Weyl, String> {
    let t = LatticeTorus::new(sites, 1.0).map_err(err)?;
    let l = t.box_length();
    let basis = build_sobolev_basis(&t, 2, &SobolevParams::new(1.0, 1.0).map_err(err)?, 200).map_err(err)?;
    let idx = basis
        .modes()
        .iter()
        .position(|m| m.k == k && m.trig == Trig::Cos && m.axis == 0 && m.lie == 2)
        .ok_or("probe mode missing")?;
    let w = basis.weight(idx);
    let sp = YmSpace::new(basis, vec![idx], ModeParams::new(1.0, vec![1.0], cutoff).map_err(err)?, cutoff).map_err(err)?;
    let x = VectorField::constant(&t, [0.25, 0.0, 0.0]);
    let one = Multiplier::One;
    let op = HolonomyDiffeo {
        multiplier: &one,
        field: &x,
        t: 1.0,
        options: TransportOptions::default(),
    };
    let probe = YmState::product(&BosonicState::vacuum(1, cutoff), &wavy_spinor(&t));
    let gen = sigma3() * c(0.0, 0.5);
    let constant = k == [0, 0, 0];
    // exact line integral of the shift form (ω/w)·e along the x-directed path
    let line = move |p: &FlowPath| -> CMat {
        let s = p.samples();
        let (a, b) = (s[0].1[0], s[s.len() - 1].1[0]);
        let integral = if constant {
            b - a
        } else {
            2f64.sqrt() * l / (2.0 * PI) * ((2.0 * PI * b / l).sin() - (2.0 * PI * a / l).sin())
        };
        &gen * c(omega / w * integral, 0.0)
    };
    let lat = sp.weyl_conjugation_check(&op, &[omega], &probe, &WeylReference::Lattice).map_err(err)?;
    let closed = sp
        .weyl_conjugation_check(&op, &[omega], &probe, &WeylReference::AbelianClosedForm(&line))
        .map_err(err)?;
    Ok(Weyl {
        lattice: lat.best(),
        closed: closed.best(),
        signs: [lat.sign(), closed.sign()],
    })
}

fn ac6_ccr() -> Outcome {
    let mut ch = Checks::new();
    let t = LatticeTorus::new(4, 1.0).map_err(err)?;
    let basis = build_sobolev_basis(&t, 2, &SobolevParams::new(1.0, 2.0).map_err(err)?, 20).map_err(err)?;
    let k = 24;
    let sp = YmSpace::new(basis, vec![2, 11], ModeParams::new(1.0, vec![1.0, 2.0], k).map_err(err)?, k).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut amps = vec![c(0.0, 0.0); k * k];
    for a in 0..6 {
        for b in 0..6 {
            amps[b * k + a] = c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
    }
    let eta = BosonicState::from_amplitudes(2, k, amps).map_err(err)?;
    let st = YmState::product(&eta, &wavy_spinor(&t));
    let (a, b) = ([0.3, -0.2], [0.25, 0.4]);
    let lhs = sp.translate_u(&a, &sp.translate_u(&b, &st).map_err(err)?).map_err(err)?;
    let rhs = sp.translate_u(&[a[0] + b[0], a[1] + b[1]], &st).map_err(err)?;
    ch.at_most("U group law", lhs.distance(&rhs).map_err(err)? / st.norm(), 1e-9);

    let mut signs = Vec::new();
    let mut lattice = 0.0f64;
    let mut ratios = Vec::new();
    for omega in [0.3, 1.0] {
        let cst = weyl_probe(8, [0, 0, 0], omega, 20)?;
        let coarse = weyl_probe(8, [1, 0, 0], omega, 20)?;
        let fine = weyl_probe(16, [1, 0, 0], omega, 20)?;
        lattice = lattice.max(cst.lattice).max(cst.closed).max(coarse.lattice).max(fine.lattice);
        ratios.push(coarse.closed / fine.closed);
        for r in [&cst, &coarse, &fine] {
            signs.extend(r.signs);
        }
    }
    ch.at_most("abelian Weyl conjugation residual", lattice, 1e-8);
    ch.holds(
        &format!("O(h²) refinement ratios {ratios:.3?} in [3,5]"),
        ratios.iter().all(|r| (3.0..=5.0).contains(r)),
    );
    ch.holds(
        &format!("single conjugation sign {} over {} probes", signs[0], signs.len()),
        signs.iter().all(|&s| s == signs[0]),
    );
    ch.finish()
}

fn ac7_continuity() -> Outcome {
    let mut ch = Checks::new();
    let t = LatticeTorus::new(4, 1.0).map_err(err)?;
    let basis = build_sobolev_basis(&t, 2, &SobolevParams::new(1.0, 1.0).map_err(err)?, 9).map_err(err)?;
    let (s, tau2, k) = (1.5, 0.8, 40);
    let sp = YmSpace::new(basis.clone(), vec![2], ModeParams::new(tau2, vec![s], k).map_err(err)?, k).map_err(err)?;
    let st = YmState::product(&BosonicState::vacuum(1, k), &wavy_spinor(&t));
    let ts = [0.5, 0.2, 0.1, 0.01, 1e-3];
    let omega = 1.3;
    let prof = sp.strong_continuity_profile(&[omega], &ts, &st).map_err(err)?;
    let mut worst = 0.0f64;
    for (&tt, &d) in ts.iter().zip(&prof) {
        let a = tt * omega;
        let overlap = (-s * a * a / (4.0 * tau2)).exp();
        worst = worst.max((d / st.norm() - (2.0 - 2.0 * overlap).sqrt()).abs());
    }
    ch.at_most("‖U_{tω}Ψ−Ψ‖ vs Gaussian overlap", worst, 1e-8);

    let kk = 8;
    let fs = FockYmSpace::new(basis, 9, vec![2], ModeParams::new(1.0, vec![1.0], kk).map_err(err)?, kk).map_err(err)?;
    let x = VectorField::constant(&t, [0.7, 0.2, 0.0]);
    let mut amps = vec![c(0.0, 0.0); kk];
    for (i, a) in amps.iter_mut().take(4).enumerate() {
        *a = c(1.0 / (i + 1) as f64, 0.1 * i as f64);
    }
    let eta = BosonicState::from_amplitudes(1, kk, amps).map_err(err)?;
    let times = [0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625];
    for particles in 0..=2 {
        let xi = sample_sector_state(9, particles, 11).map_err(err)?;
        let st = FockYmState::product(&xi, &eta);
        let mut ds = Vec::new();
        for &tt in &times {
            ds.push(fs.combined_action(&x, tt, 8, Weighting::Conjugated, &st).map_err(err)?.distance(&st).map_err(err)?);
        }
        let monotone = ds.windows(2).all(|w| w[1] <= w[0] + 1e-14);
        let to_zero = ds[ds.len() - 1] <= 0.05 * ds[0] + 1e-12;
        ch.holds(&format!("{particles}-particle profile monotone to 0 ({:.2e} -> {:.2e})", ds[0], ds[ds.len() - 1]), monotone && to_zero);
    }
    ch.finish()
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..1 << n {
        if mask.count_ones() as usize == k {
            out.push((0..n).filter(|i| mask >> i & 1 == 1).collect());
        }
    }
    out
}

/// `Λ^k F` from explicit minors.
fn minors(f: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let s = subsets(f.nrows(), k);
    DMatrix::from_fn(s.len(), s.len(), |r, cc| {
        if k == 0 {
            return 1.0;
        }
        DMatrix::from_fn(k, k, |a, b| f[(s[r][a], s[cc][b])]).determinant()
    })
}

fn ac8_fock() -> Outcome {
    let mut ch = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 6;
    let fi: Vec<Vec<i64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-4..=4)).collect()).collect();
    let gi: Vec<Vec<i64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-4..=4)).collect()).collect();
    let fg: Vec<Vec<i64>> = (0..n).map(|r| (0..n).map(|cc| (0..n).map(|m| fi[r][m] * gi[m][cc]).sum()).collect()).collect();
    let mut exact = true;
    for k in 0..=n {
        let (a, b, ab) = (
            exterior_power_exact(&fi, k).map_err(err)?,
            exterior_power_exact(&gi, k).map_err(err)?,
            exterior_power_exact(&fg, k).map_err(err)?,
        );
        for r in 0..a.len() {
            for cc in 0..a.len() {
                exact &= (0..a.len()).map(|m| a[r][m] * b[m][cc]).sum::<i128>() == ab[r][cc];
            }
        }
    }
    let f = DMatrix::from_fn(n, n, |r, cc| fi[r][cc] as f64);
    let v: Vec<Complex64> = (0..n).map(|i| c(i as f64 - 2.0, 0.0)).collect();
    let w: Vec<Complex64> = (0..n).map(|i| c(1.0 - (i % 3) as f64, 0.0)).collect();
    let fv: Vec<Complex64> = (0..n).map(|r| (0..n).map(|cc| v[cc] * f[(r, cc)]).sum()).collect();
    let fw: Vec<Complex64> = (0..n).map(|r| (0..n).map(|cc| w[cc] * f[(r, cc)]).sum()).collect();
    let wedge = FermionState::one_particle(&v).and_then(|a| a.wedge(&FermionState::one_particle(&w)?)).map_err(err)?;
    let lhs = fock_action(&f, &wedge).map_err(err)?;
    let rhs = FermionState::one_particle(&fv).and_then(|a| a.wedge(&FermionState::one_particle(&fw)?)).map_err(err)?;
    exact &= lhs.amplitudes() == rhs.amplitudes();
    ch.holds("exterior-power multiplicativity exact (integer minors and F(v∧w)=Fv∧Fw)", exact);

    let mut worst = 0.0f64;
    for nn in 1..=6 {
        let m = DMatrix::from_fn(nn, nn, |_, _| 2.0 * rng.random::<f64>() - 1.0);
        let norms = sector_norm_bound(&m, nn, 0).map_err(err)?;
        for s in norms {
            let direct = SVD::new(minors(&m, s.k), false, false).singular_values.max();
            worst = worst.max((direct - s.prediction).abs() / direct.max(1.0));
        }
    }
    ch.at_most("sector norm vs Λ^k SVD", worst, 1e-10);

    let t = LatticeTorus::new(4, 1.0).map_err(err)?;
    let lie = LieBasis::su(2).map_err(err)?;
    let basis = build_sobolev_basis(&t, 2, &SobolevParams::new(1.0, 2.0).map_err(err)?, 576).map_err(err)?;
    let conn = smooth_connection(&t, &lie)?;
    let x = VectorField::constant(&t, [0.25, 0.0, 0.25]);
    let gram_defect = |m: &DMatrix<f64>| (m.transpose() * m - DMatrix::identity(m.ncols(), m.ncols())).amax();
    let conj = one_particle_action(&basis, 576, &x, 1.0, &conn, 8, Weighting::Conjugated).map_err(err)?;
    let direct = one_particle_action(&basis, 576, &x, 1.0, &conn, 8, Weighting::Direct).map_err(err)?;
    let dc = gram_defect(&conj.matrix());
    let dd = gram_defect(&direct.matrix());
    ch.at_most("weight-conjugated action orthogonality defect", dc, 1e-6);
    ch.holds(&format!("unweighted action defect {dd:.3e} > 1e-3"), dd > 1e-3);
    let iso = sector_norm_bound(&conj.matrix(), 6, 0).map_err(err)?;
    ch.at_most("isometric sector norms vs 1", iso.iter().map(|s| (s.prediction - 1.0).abs()).fold(0.0, f64::max), 1e-6);
    ch.finish()
}

fn regression(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

fn ac9_commutator() -> Outcome {
    let mut ch = Checks::new();
    let t = LatticeTorus::new(8, 1.0).map_err(err)?;
    let x = VectorField::constant(&t, [1.0, 0.0, 0.0]);
    for sigma in [2.0, 3.0] {
        let params = SobolevParams::new(1.0, sigma).map_err(err)?;
        let basis = build_sobolev_basis(&t, 2, &params, 4608).map_err(err)?;
        let prof = commutator_growth_profile(&x, [0.0; 3], 0.01 * t.spacing(), 4, &basis, 1.0, 4608, 1e-4).map_err(err)?;
        ch.holds(&format!("σ={sigma}: Γ(n) non-decreasing"), prof.gamma.windows(2).all(|w| w[1] >= w[0]));
        let n = prof.increments.len();
        let start = n / 10;
        let coupling: Vec<f64> = (start..n).map(|i| prof.increments[i] * prof.weights[i].powi(2)).collect();
        let cmax = coupling.iter().cloned().fold(0.0, f64::max);
        let (mut lx, mut ly, mut lp) = (Vec::new(), Vec::new(), Vec::new());
        for (j, i) in (start..n).enumerate() {
            if coupling[j] >= 1e-3 * cmax && prof.increments[i] > 0.0 {
                let lam = basis.eigenvalue(i);
                lx.push(((i + 1) as f64).ln());
                ly.push(prof.increments[i].ln());
                lp.push(-2.0 * (1.0 + lam.powf(sigma)).ln());
            }
        }
        let measured = regression(&lx, &ly);
        let predicted = regression(&lx, &lp);
        let rel = (measured - predicted).abs() / predicted.abs();
        ch.at_most(&format!("σ={sigma}: slope {measured:.3} vs predicted {predicted:.3}, relative"), rel, 0.25);
        let lib = last_decade_slope(&prof, 1e-3).map_err(err)?;
        ch.at_most(&format!("σ={sigma}: library slope agrees with oracle regression"), (lib.measured - measured).abs(), 1e-9);
    }
    ch.finish()
}

fn ac10_determinism() -> Outcome {
    let mut ch = Checks::new();
    let cfg = ExperimentConfig::default();
    let a = tempfile::tempdir().map_err(err)?;
    let b = tempfile::tempdir().map_err(err)?;
    let ra = run_and_write(Selection::All, &cfg, 1.0, a.path()).map_err(err)?;
    run_and_write(Selection::All, &cfg, 1.0, b.path()).map_err(err)?;
    ch.holds("default `all` run passes every suite", ra.pass());
    let mut names: Vec<_> = std::fs::read_dir(a.path()).map_err(err)?.map(|e| e.map(|e| e.file_name())).collect::<Result<_, _>>().map_err(err)?;
    names.sort();
    let mut same = !names.is_empty();
    for n in &names {
        same &= std::fs::read(a.path().join(n)).map_err(err)? == std::fs::read(b.path().join(n)).map_err(err)?;
    }
    let count_b = std::fs::read_dir(b.path()).map_err(err)?.count();
    ch.holds(&format!("{} report files byte-identical across runs", names.len()), same && count_b == names.len());
    ch.finish()
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("AC1 CAR relations", ac1_car_relations),
        ("AC2 Bott-Dirac spectrum", ac2_bott_spectrum),
        ("AC3 embedding isometry", ac3_embedding),
        ("AC4 Sobolev suite", ac4_sobolev),
        ("AC5 holonomy suite", ac5_holonomy),
        ("AC6 translation/CCR suite", ac6_ccr),
        ("AC7 strong continuity", ac7_continuity),
        ("AC8 Fock suite", ac8_fock),
        ("AC9 commutator profile", ac9_commutator),
        ("AC10 determinism", ac10_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(notes) => println!("PASS {name} [{secs:.1}s]: {}", notes.join("; ")),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} [{secs:.1}s]: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
