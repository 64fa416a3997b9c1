//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subeq::cone::{
    self, oracle, ConeConfig, ConvexSetRep, GeneratedCone, HalfSpace, HalfSpaceList, RecessionCone, SupportVerdict,
};
use subeq::elliptic::{
    self, Coefficient, DiscMesh, DiscreteMeasure, EllipticOperator, HarnessConfig, Region,
};
use subeq::grid::GridFunction;
use subeq::jet_space::{Jet2, JetHalfSpace, JetOperator, SymMatrix};
use subeq::linalg;
use subeq::subequation::{self, SubequationSpec};
use subeq::subharmonic::{self, DistributionalConfig, ProbeDictionary};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg.into()) }
}

fn unit_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = linalg::norm(&v);
        if n > 1e-2 && n <= 1.0 {
            return linalg::scale(&v, 1.0 / n);
        }
    }
}

fn parabola_recession_and_stab() -> Outcome {
    let f = ConvexSetRep::Oracle(oracle::parabola_a9());
    let cfg = ConeConfig::with_seed(11);
    let rays = match cone::recession_cone(&f, &cfg).map_err(|e| e.to_string())? {
        RecessionCone::Generated(g) => g.rays,
        _ => return Err("recession cone is not a generated cone".into()),
    };
    ensure(rays.len() == 1, format!("{} recession rays", rays.len()))?;
    let angle = rays[0][0].atan2(rays[0][1]).abs();
    ensure(angle < 1e-6, format!("ray angle error {angle:e}"))?;
    let span = cone::dual_span(&f, &cfg).map_err(|e| e.to_string())?;
    let edge = cone::edge(&f, &cfg).map_err(|e| e.to_string())?;
    ensure(span.dim() == 2 && edge.dim() == 0, format!("span dim {}, edge dim {}", span.dim(), edge.dim()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut tested = 0;
    while tested < 50 {
        let w = unit_vec(&mut rng, 2);
        if w[1] <= 0.05 {
            continue;
        }
        tested += 1;
        ensure(cone::stab_membership(&w, &f, &cfg).map_err(|e| e.to_string())?, format!("w = {w:?} not stable"))?;
    }
    for w in [[1.0, 0.0], [-1.0, 0.0]] {
        ensure(!cone::stab_membership(&w, &f, &cfg).map_err(|e| e.to_string())?, format!("{w:?} reported stable"))?;
    }
    let inf = cone::support_infimum(&f, &[1.0, 0.0], &cfg).map_err(|e| e.to_string())?;
    ensure(!inf.is_finite(), "support infimum along (1,0) is finite")?;
    Ok(format!("ray angle error {angle:.1e}, 50 stable probes"))
}

fn bipolar_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = ConeConfig::with_seed(2);
    let mut checked = 0usize;
    let mut mismatches = 0usize;
    let mut compare = |f: &ConvexSetRep, rng: &mut ChaCha8Rng| -> Result<(), String> {
        let bb = cone::bipolar_roundtrip(f, &cfg).map_err(|e| e.to_string())?;
        let d = f.dim();
        for _ in 0..200 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            checked += 1;
            if f.contains(&x, 1e-9) != bb.contains(&x, 1e-9) {
                mismatches += 1;
            }
        }
        Ok(())
    };
    for k in 0..100 {
        let d = 2 + k % 3;
        let m = d + rng.gen_range(0..4);
        let rays: Vec<Vec<f64>> = (0..m).map(|_| unit_vec(&mut rng, d)).collect();
        let c = GeneratedCone::new(d, rays).map_err(|e| e.to_string())?;
        compare(&c.to_generators().into(), &mut rng)?;
    }
    for k in 0..20 {
        let d = 2 + k % 3;
        let m = d + 1 + rng.gen_range(0..d + 2);
        let items = (0..m)
            .map(|_| HalfSpace::new(unit_vec(&mut rng, d), -rng.gen_range(0.2..1.5)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        compare(&HalfSpaceList::new(d, items).map_err(|e| e.to_string())?.into(), &mut rng)?;
    }
    ensure(mismatches == 0, format!("{mismatches} of {checked} sampled memberships differ"))?;
    Ok(format!("120 sets, {checked} sampled points, symmetric difference 0"))
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> SymMatrix {
    let mut a = SymMatrix::zeros(n);
    for _ in 0..rank {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        a = a.plus(&SymMatrix::from_fn(n, |i, j| v[i] * v[j]));
    }
    a
}

fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    let entries = (0..n * (n + 1) / 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
    SymMatrix::new(n, entries).expect("packed length")
}

fn completeness_matches_ellipticity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut complete_count = 0;
    for t in 0..200u64 {
        let n = 2 + (t % 2) as usize;
        let m = 1 + rng.gen_range(0..3);
        let items = (0..m)
            .map(|_| {
                let rank = rng.gen_range(1..=n);
                let a = random_psd(&mut rng, n, rank);
                let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let c = -rng.gen_range(0.0..1.0);
                JetHalfSpace::new(JetOperator::new(c, b, a)?, rng.gen_range(-1.0..1.0))
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let spec = SubequationSpec::from_halfspaces(n, &items, "random").map_err(|e| e.to_string())?;
        let report = subequation::second_order_complete(&spec, &ConeConfig::with_seed(t)).map_err(|e| e.to_string())?;
        let samples = subequation::sample_stable(&spec, 100, t).map_err(|e| e.to_string())?;
        let elliptic = samples.iter().all(|s| s.min_symbol_eigenvalue > 1e-10);
        ensure(report.complete == elliptic, format!("spec {t}: complete = {}, elliptic = {elliptic}", report.complete))?;
        complete_count += report.complete as usize;
    }
    let a11 = SubequationSpec::diagonal(2, &[0]).map_err(|e| e.to_string())?;
    let both = SubequationSpec::diagonal(2, &[0, 1]).map_err(|e| e.to_string())?;
    let named = [
        ("{A11>=0}", a11, false),
        ("{A11>=0}&{A22>=0}", both, true),
        ("{tr A>=0}", SubequationSpec::laplacian(2), true),
        ("PSD", SubequationSpec::builtin_psd(2), true),
    ];
    for (name, spec, want) in named {
        let r = subequation::second_order_complete(&spec, &ConeConfig::with_seed(5)).map_err(|e| e.to_string())?;
        ensure(r.complete == want, format!("{name}: complete = {}", r.complete))?;
    }
    Ok(format!("200 random specs ({complete_count} complete) and 4 named fixtures agree"))
}

fn decomposition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 2;
    let mut max_escalations = 0;
    for (name, spec) in [("PSD", SubequationSpec::builtin_psd(n)), ("Laplacian", SubequationSpec::laplacian(n))] {
        let psd = name == "PSD";
        let mut inside = Vec::new();
        let mut outside = Vec::new();
        for _ in 0..100 {
            let r = rng.gen_range(-2.0..2.0);
            let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let a_in = if psd {
                let rank = rng.gen_range(0..=n);
                random_psd(&mut rng, n, rank)
            } else {
                let m = random_sym(&mut rng, n);
                let shift = (rng.gen_range(0.0..1.0) - m.trace()) / n as f64;
                m.plus(&SymMatrix::identity(n).scaled(shift))
            };
            inside.push(Jet2::new(r, p.clone(), a_in).map_err(|e| e.to_string())?);
            // exterior at distance ≥ 0.1 in the Frobenius metric of the coordinates
            let a_out = if psd {
                let e = unit_vec(&mut rng, n);
                let depth = rng.gen_range(0.1..2.0);
                // e stays an eigenvector with eigenvalue −depth
                let g = [-e[1], e[0]];
                let s = rng.gen_range(0.0..1.0);
                SymMatrix::from_fn(n, |i, j| s * g[i] * g[j] - depth * e[i] * e[j])
            } else {
                let m = random_sym(&mut rng, n);
                let tr = -rng.gen_range(0.1..2.0) * (n as f64).sqrt();
                m.plus(&SymMatrix::identity(n).scaled((tr - m.trace()) / n as f64))
            };
            outside.push(Jet2::new(r, p, a_out).map_err(|e| e.to_string())?);
        }
        let stable = subequation::sample_stable(&spec, 50, 40).map_err(|e| e.to_string())?;
        let rep = subequation::decomposition_check(&spec, &stable, &inside, &outside, 41).map_err(|e| e.to_string())?;
        ensure(rep.inside_violations.is_empty(), format!("{name}: {} interior jets violate", rep.inside_violations.len()))?;
        for (i, o) in rep.outside.iter().enumerate() {
            ensure(o.excluded && o.escalations <= 3, format!("{name}: exterior jet {i} excluded = {} after {} escalations", o.excluded, o.escalations))?;
            max_escalations = max_escalations.max(o.escalations);
        }
    }
    Ok(format!("200 interior and 200 exterior jets, at most {max_escalations} escalations"))
}

fn edge_independence_and_stab() -> Outcome {
    let fixtures: Vec<(&str, ConvexSetRep)> = vec![
        ("laplacian", SubequationSpec::laplacian(2).rep),
        ("a11", SubequationSpec::diagonal(2, &[0]).map_err(|e| e.to_string())?.rep),
        ("a11&a22", SubequationSpec::diagonal(2, &[0, 1]).map_err(|e| e.to_string())?.rep),
        ("psd", ConvexSetRep::Oracle(oracle::psd_jets(2))),
        ("parabola", ConvexSetRep::Oracle(oracle::parabola_a9())),
        ("unit_ball", ConvexSetRep::Oracle(oracle::unit_ball(3))),
        (
            "quadrant",
            GeneratedCone::new(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).map_err(|e| e.to_string())?.to_generators().into(),
        ),
    ];
    let cfg = ConeConfig::with_seed(5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut violations = Vec::new();
    let mut stab_checked = 0;
    for (name, f) in &fixtures {
        let reference = cone::edge(f, &cfg).map_err(|e| e.to_string())?;
        let o = cone::as_oracle(f, &cfg).map_err(|e| e.to_string())?;
        for base in o.sample_box_members(&mut rng, 5) {
            let e = cone::edge_from(&o, &base);
            if e.dim() != reference.dim() || e.distance(&reference) > 1e-9 {
                violations.push(format!("{name}: edge from {base:?} has dim {}", e.dim()));
            }
        }
        let d = f.dim();
        for _ in 0..20 {
            let w = unit_vec(&mut rng, d);
            if cone::stab_membership(&w, f, &cfg).map_err(|e| e.to_string())? {
                stab_checked += 1;
                let v = cone::supporting_test(&w, f, &cfg).map_err(|e| e.to_string())?;
                if !matches!(v, SupportVerdict::Supporting { .. }) {
                    violations.push(format!("{name}: stable {w:?} is not supporting"));
                }
            }
        }
        // the dual-span directions of H-rep fixtures are stable by construction
        if let ConvexSetRep::HRep(hl) = f {
            let w = hl.normals().into_iter().fold(vec![0.0; d], |acc, n| linalg::add(&acc, &n));
            stab_checked += 1;
            if !cone::stab_membership(&w, f, &cfg).map_err(|e| e.to_string())? {
                violations.push(format!("{name}: sum of normals not stable"));
            } else if !matches!(cone::supporting_test(&w, f, &cfg).map_err(|e| e.to_string())?, SupportVerdict::Supporting { .. }) {
                violations.push(format!("{name}: sum of normals not supporting"));
            }
        }
    }
    ensure(violations.is_empty(), violations.join("; "))?;
    Ok(format!("{} fixtures, 5 base points each, {stab_checked} stable directions supporting", fixtures.len()))
}

fn linear_harness() -> Outcome {
    let mut lines = Vec::new();
    let aniso = EllipticOperator::principal(
        SymMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).map_err(|e| e.to_string())?,
        1e-3,
    )
    .map_err(|e| e.to_string())?;
    for (name, op) in [("laplacian", EllipticOperator::laplacian(2)), ("anisotropic", aniso)] {
        let battery = elliptic::shipped_battery(&op).map_err(|e| e.to_string())?;
        let rep = elliptic::equivalence_harness(&battery, &op, &HarnessConfig::new(6)).map_err(|e| e.to_string())?;
        for m in &rep.members {
            ensure(m.agree, format!("{name}/{}: visc {} class {} dist {}", m.name, m.viscosity, m.classical, m.distributional))?;
            ensure(m.viscosity == m.expected, format!("{name}/{}: verdict {} expected {}", m.name, m.viscosity, m.expected))?;
            ensure(m.roundtrip_ok, format!("{name}/{}: round trip {:e} > {:e}", m.name, m.roundtrip_error, m.roundtrip_bound))?;
        }
        lines.push(format!("{name}: {} members", rep.members.len()));
    }
    Ok(lines.join(", "))
}

fn kernels() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let radius = 1.0;
    let mesh = DiscMesh::new([0.0, 0.0], radius, 512, 1.0 / 32.0).map_err(|e| e.to_string())?;
    let mut worst_mass: f64 = 0.0;
    for _ in 0..50 {
        let t = rng.gen_range(0.0..2.0 * PI);
        let s = rng.gen_range(0.0..0.8);
        let x = [s * t.cos(), s * t.sin()];
        let mass: f64 = (0..512)
            .map(|j| elliptic::poisson_kernel(x, mesh.boundary_point(j), radius))
            .sum::<Result<f64, _>>()
            .map_err(|e| e.to_string())?
            * mesh.arc();
        worst_mass = worst_mass.max((mass - 1.0).abs());
    }
    ensure(worst_mass <= 1e-6, format!("Poisson mass error {worst_mass:e}"))?;
    let mut worst_sym: f64 = 0.0;
    let mut worst_bdry: f64 = 0.0;
    for _ in 0..500 {
        let mut pt = || {
            let t = rng.gen_range(0.0..2.0 * PI);
            let s = radius * rng.gen_range(0.0f64..1.0).sqrt();
            [s * t.cos(), s * t.sin()]
        };
        let (x, y) = (pt(), pt());
        let gxy = elliptic::green_kernel(x, y, radius).map_err(|e| e.to_string())?;
        let gyx = elliptic::green_kernel(y, x, radius).map_err(|e| e.to_string())?;
        ensure(gxy <= 0.0, format!("G({x:?}, {y:?}) = {gxy} > 0"))?;
        worst_sym = worst_sym.max((gxy - gyx).abs());
        let t = rng.gen_range(0.0..2.0 * PI);
        let b = [radius * t.cos(), radius * t.sin()];
        worst_bdry = worst_bdry.max(elliptic::green_kernel(x, b, radius).map_err(|e| e.to_string())?.abs());
    }
    ensure(worst_sym <= 1e-10, format!("symmetry error {worst_sym:e}"))?;
    ensure(worst_bdry <= 1e-10, format!("boundary value {worst_bdry:e}"))?;
    let coarse = DiscMesh::new([0.0, 0.0], radius, 64, 1.0 / 16.0).map_err(|e| e.to_string())?;
    let mu = DiscreteMeasure::new(vec![[0.0, 0.0], [0.3, -0.2], [-0.41, 0.27]], vec![1.0, 0.5, 2.0], &coarse)
        .map_err(|e| e.to_string())?;
    let gp = elliptic::green_potential(&mu, &coarse).map_err(|e| e.to_string())?;
    let monotone = gp.stack.windows(2).all(|w| w[1].values().iter().zip(w[0].values()).all(|(a, b)| a <= b));
    ensure(monotone, "truncation stack is not decreasing")?;
    Ok(format!("mass error {worst_mass:.1e}, symmetry {worst_sym:.1e}, boundary {worst_bdry:.1e}"))
}

fn maximum_principle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let h = 1.0 / 16.0;
    let size = 17;
    let mut worst: f64 = f64::NEG_INFINITY;
    for t in 0..50 {
        let d1: f64 = rng.gen_range(0.5..2.0);
        let d2 = rng.gen_range(0.5..2.0);
        let off = rng.gen_range(-0.5..0.5) * d1.min(d2);
        let a = SymMatrix::from_rows(&[vec![d1, off], vec![off, d2]]).map_err(|e| e.to_string())?;
        let b = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let c = if t % 5 == 0 { 0.0 } else { -rng.gen_range(0.0..2.0) };
        let op = EllipticOperator::new(Coefficient::Constant(a), b, c, 0.0, 1e-3).map_err(|e| e.to_string())?;
        let vals: Vec<f64> = (0..size * size).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = GridFunction::new(vec![size; 2], vec![0.0; 2], h, vals).map_err(|e| e.to_string())?;
        let region = Region::Box { lo: vec![0, 0], hi: vec![size - 1, size - 1] };
        let phi = elliptic::fd_dirichlet_solve(&op, &g, &region, 1e-13).map_err(|e| e.to_string())?;
        let interior = region.interior(&g).map_err(|e| e.to_string())?;
        let mut is_inner = vec![false; g.len()];
        for &i in &interior {
            is_inner[i] = true;
        }
        let bdry_max = (0..g.len()).filter(|&i| !is_inner[i]).map(|i| phi.value(i)).fold(f64::NEG_INFINITY, f64::max);
        let bound = if c < 0.0 { bdry_max.max(0.0) } else { bdry_max };
        let inner_max = interior.iter().map(|&i| phi.value(i)).fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(inner_max - bound);
        ensure(inner_max <= bound + 1e-8, format!("solve {t}: interior max exceeds boundary max by {:e}", inner_max - bound))?;
    }
    Ok(format!("50 solves, worst interior excess {worst:.1e}"))
}

fn grid(size: usize, h: f64, f: impl Fn(&[f64]) -> f64) -> Result<GridFunction, String> {
    let o = -((size - 1) as f64) * h / 2.0;
    GridFunction::sample(vec![size; 2], vec![o; 2], h, f).map_err(|e| e.to_string())
}

fn regularization() -> Outcome {
    let h = 1.0 / 20.0;
    let radii = [6.0 * h, 4.0 * h, 2.0 * h];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise: Vec<f64> = (0..41 * 41).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let rough = grid(41, h, |_| 0.0)?.with_values(noise).map_err(|e| e.to_string())?;
    let e = subharmonic::ess_limsup(&rough, &radii).map_err(|e| e.to_string())?;
    let r = subharmonic::regularization_properties(&rough, &e, None, &[]);
    ensure(r.radius_monotone, "radius monotonicity fails on noise")?;

    let lip = (4.0f64 + 0.25).sqrt();
    let smooth = grid(41, h, |x| (2.0 * x[0]).sin() + 0.5 * x[1])?;
    let e = subharmonic::ess_limsup(&smooth, &radii).map_err(|e| e.to_string())?;
    let all: Vec<usize> = (0..smooth.len()).collect();
    let r = subharmonic::regularization_properties(&smooth, &e, Some((&smooth, lip * e.r_min())), &all);
    ensure(r.radius_monotone && r.dominated == Some(true) && r.lebesgue_points, format!("smooth representative: {r:?}"))?;

    let plateau = grid(41, h, |_| 3.0)?;
    let x0 = plateau.nearest(&[0.0, 0.0]);
    let mut vals = plateau.values().to_vec();
    vals[x0] = -7.0;
    let spike = plateau.with_values(vals).map_err(|e| e.to_string())?;
    let e = subharmonic::ess_limsup(&spike, &[2.0 * h]).map_err(|e| e.to_string())?;
    ensure(e.finest().value(x0) == 3.0, format!("spike regularizes to {}", e.finest().value(x0)))?;
    Ok(format!("excess {:.2e} ≤ Lip·r_min = {:.2e}, spike removed", r.max_excess.unwrap_or(0.0), lip * 2.0 * h))
}

fn round_trip() -> Outcome {
    let spec = SubequationSpec::diagonal(2, &[0, 1]).map_err(|e| e.to_string())?;
    let probes = ProbeDictionary::standard(2);
    let h = 1.0 / 32.0;
    let q1 = |x: &[f64]| x[0] * x[0] + 0.5 * x[1] * x[1] + x[0] * x[1];
    let q2 = |x: &[f64]| 0.2 * x[0] * x[0] + x[1] * x[1] - 0.3 * x[0] + 0.1;
    let u = grid(65, h, |x| q1(x).max(q2(x)))?;
    let lip = (0..u.len())
        .map(|i| {
            let x = u.point(i);
            let g1 = linalg::norm(&[2.0 * x[0] + x[1], x[1] + x[0]]);
            let g2 = linalg::norm(&[0.4 * x[0] - 0.3, 2.0 * x[1]]);
            g1.max(g2)
        })
        .fold(0.0, f64::max);
    let visc = subharmonic::viscosity_check(&u, &spec, &probes, 1e-6).map_err(|e| e.to_string())?;
    ensure(visc.pass, "viscosity check fails")?;
    let dist = subharmonic::distributional_check(&u, &spec, &DistributionalConfig::new(6.0 * h, 10)).map_err(|e| e.to_string())?;
    ensure(dist.pass, "distributional check fails")?;
    let smooth = subharmonic::mollify(&u, 3.0 * h).map_err(|e| e.to_string())?;
    let e = subharmonic::ess_limsup(&smooth, &[4.0 * h, 2.0 * h]).map_err(|e| e.to_string())?;
    let err = e.finest().values().iter().zip(u.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let bound = 4.0 * h * lip;
    ensure(err <= bound, format!("round-trip error {err:e} > {bound:e}"))?;
    Ok(format!("round-trip error {err:.3e} ≤ 4h·Lip = {bound:.3e}"))
}

fn main() {
    // `cargo test -- <filter>` and `--list` arguments are ignored
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("parabola recession cone, edge and Stab", parabola_recession_and_stab),
        ("bipolar round trip", bipolar_suite),
        ("completeness matches ellipticity", completeness_matches_ellipticity),
        ("decomposition into stable half-spaces", decomposition),
        ("edge base-point independence, Stab within Spt", edge_independence_and_stab),
        ("linear-case equivalence harness", linear_harness),
        ("Poisson and Green kernels", kernels),
        ("discrete maximum principle", maximum_principle),
        ("regularization properties", regularization),
        ("grid-scale round trip", round_trip),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:2} PASS  {name}: {detail} ({secs:.1}s)", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:2} FAIL  {name}: {why} ({secs:.1}s)", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
