//! Subequations `F ⊂ J²(Rⁿ)`: axiom checks, fibres, second-order
//! completeness, stable operators and the half-space decomposition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{self, oracle, polyhedral, ConeConfig, ConvexSetRep, HalfSpace, HalfSpaceList, OracleSet, Subspace};
use crate::error::{Error, Result};
use crate::jet_space::{self, jet_dim, min_eigenvalue, packed_len, Jet2, JetHalfSpace, JetOperator, SymMatrix};
use crate::linalg;

/// Kernel threshold for summed symbols, relative to their norm.
const KERNEL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecKind {
    HalfspaceList,
    BuiltinPsd,
    BuiltinParabolaA9,
    Oracle,
}

#[derive(Debug, Clone)]
pub struct SubequationSpec {
    pub n: usize,
    pub rep: ConvexSetRep,
    pub kind: SpecKind,
    pub name: String,
    pub notes: String,
}

impl SubequationSpec {
    pub fn new(n: usize, rep: ConvexSetRep, kind: SpecKind, name: impl Into<String>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("spatial dimension must be positive".into()));
        }
        if rep.dim() != jet_dim(n) {
            return Err(Error::DimensionMismatch { expected: jet_dim(n), got: rep.dim() });
        }
        Ok(Self { n, rep, kind, name: name.into(), notes: String::new() })
    }

    /// Intersection of jet half-spaces.
    pub fn from_halfspaces(n: usize, items: &[JetHalfSpace], name: impl Into<String>) -> Result<Self> {
        let mut hs = Vec::with_capacity(items.len());
        for it in items {
            if it.operator.n() != n {
                return Err(Error::DimensionMismatch { expected: n, got: it.operator.n() });
            }
            hs.push(HalfSpace::new(it.operator.to_vector(), it.lambda)?);
        }
        let rep = ConvexSetRep::HRep(HalfSpaceList::new(jet_dim(n), hs)?);
        Self::new(n, rep, SpecKind::HalfspaceList, name)
    }

    /// `{tr A ≥ 0}`.
    pub fn laplacian(n: usize) -> Self {
        let l = JetHalfSpace::new(JetOperator::laplacian(n), 0.0).expect("nonzero");
        Self::from_halfspaces(n, &[l], "laplacian").expect("well formed")
    }

    /// `{A : A_ii ≥ 0}` for each listed axis.
    pub fn diagonal(n: usize, axes: &[usize]) -> Result<Self> {
        let items: Vec<JetHalfSpace> = axes
            .iter()
            .map(|&i| {
                let mut a = SymMatrix::zeros(n);
                a.set(i, i, 1.0);
                JetHalfSpace::new(JetOperator::second_order(a), 0.0)
            })
            .collect::<Result<_>>()?;
        Self::from_halfspaces(n, &items, format!("diagonal{axes:?}"))
    }

    pub fn builtin_psd(n: usize) -> Self {
        Self::new(n, ConvexSetRep::Oracle(oracle::psd_jets(n)), SpecKind::BuiltinPsd, "psd").expect("dimension")
    }

    /// Parses a spec file: `{"n", "kind", "halfspaces": [{"a", "b", "c",
    /// "lambda"}]}` with `a` the upper triangle, row-major. Kinds are
    /// `halfspace_list`, `builtin_psd` and `builtin_laplacian`.
    pub fn parse_json(text: &str) -> Result<Self> {
        let file: SpecFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let n = file.n;
        if n == 0 {
            return Err(Error::Invalid("spatial dimension must be positive".into()));
        }
        let no_items = |kind: &str| -> Result<()> {
            if file.halfspaces.is_some() {
                return Err(Error::Invalid(format!("kind {kind} takes no half-spaces")));
            }
            Ok(())
        };
        match file.kind.as_str() {
            "halfspace_list" => {
                let items = file
                    .halfspaces
                    .as_deref()
                    .unwrap_or_default()
                    .iter()
                    .map(|h| {
                        let a = SymMatrix::new(n, h.a.clone())?;
                        let b = h.b.clone().unwrap_or_else(|| vec![0.0; n]);
                        JetHalfSpace::new(JetOperator::new(h.c, b, a)?, h.lambda)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::from_halfspaces(n, &items, "halfspace_list")
            }
            "builtin_laplacian" => {
                no_items("builtin_laplacian")?;
                Ok(Self::laplacian(n))
            }
            "builtin_psd" => {
                no_items("builtin_psd")?;
                Ok(Self::builtin_psd(n))
            }
            "builtin_parabola_a9" => {
                Err(Error::Unsupported("builtin_parabola_a9 is a planar set, not a subequation".into()))
            }
            other => Err(Error::Parse(format!("unknown kind {other:?}"))),
        }
    }

    /// The H-rep items as jet half-spaces.
    pub fn halfspaces(&self) -> Option<Vec<JetHalfSpace>> {
        match &self.rep {
            ConvexSetRep::HRep(h) => Some(
                h.items()
                    .iter()
                    .map(|it| JetHalfSpace {
                        operator: JetOperator::from_vector(self.n, &it.w).expect("jet dimension"),
                        lambda: it.lambda,
                    })
                    .collect(),
            ),
            _ => None,
        }
    }

    pub fn contains(&self, jet: &Jet2, tol: f64) -> bool {
        self.rep.contains(&jet.to_vector(), tol)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    n: usize,
    kind: String,
    halfspaces: Option<Vec<HalfspaceEntry>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HalfspaceEntry {
    a: Vec<f64>,
    b: Option<Vec<f64>>,
    #[serde(default)]
    c: f64,
    #[serde(default)]
    lambda: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomWitness {
    pub axiom: &'static str,
    /// A jet of `F`.
    pub jet: Vec<f64>,
    /// Direction whose addition leaves `F`.
    pub direction: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub positivity: bool,
    pub negativity: bool,
    pub topological: bool,
    pub proper: bool,
    pub nonempty: bool,
    pub witnesses: Vec<AxiomWitness>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.positivity && self.negativity && self.topological && self.proper && self.nonempty
    }
}

/// Checks the subequation axioms; `k` is the probe count for oracle kinds.
pub fn validate(spec: &SubequationSpec, k: usize, seed: u64) -> ValidationReport {
    match &spec.rep {
        ConvexSetRep::HRep(h) => validate_hrep(spec, h),
        ConvexSetRep::Oracle(o) => validate_oracle(spec, o, k, seed),
        ConvexSetRep::VRep(_) => {
            // generator lists never satisfy positivity unless they carry all
            // PSD rays; the check goes through the oracle view
            let o = cone::as_oracle(&spec.rep, &ConeConfig::with_seed(seed));
            match o {
                Ok(o) => validate_oracle(spec, &o, k, seed),
                Err(_) => ValidationReport {
                    positivity: false,
                    negativity: false,
                    topological: false,
                    proper: false,
                    nonempty: false,
                    witnesses: Vec::new(),
                },
            }
        }
    }
}

fn validate_hrep(spec: &SubequationSpec, h: &HalfSpaceList) -> ValidationReport {
    let n = spec.n;
    let items = spec.halfspaces().expect("hrep");
    let feasible = h.feasible_point();
    let nonempty = feasible.is_some();
    let mut witnesses = Vec::new();

    let mut positivity = true;
    for (it, raw) in items.iter().zip(h.items()) {
        let eig = it.operator.a.eigen();
        if eig.values[0] < -1e-10 {
            positivity = false;
            if let Some(x) = &feasible {
                let e = &eig.vectors[0];
                let t = (raw.slack(x).max(0.0) + 1.0) / -eig.values[0];
                let pe = jet_space::rank_one_projector(e).expect("unit eigenvector").scaled(t);
                witnesses.push(AxiomWitness {
                    axiom: "positivity",
                    jet: x.clone(),
                    direction: Jet2::hessian(pe).to_vector(),
                });
            }
            break;
        }
    }

    let negativity = items.iter().all(|it| it.operator.c <= 1e-12);
    if let (false, Some(x)) = (negativity, &feasible) {
        let it = items.iter().zip(h.items()).find(|(it, _)| it.operator.c > 1e-12).expect("violator");
        let t = (it.1.slack(x).max(0.0) + 1.0) / it.0.operator.c;
        let mut dir = vec![0.0; jet_dim(n)];
        dir[0] = -t;
        witnesses.push(AxiomWitness { axiom: "negativity", jet: x.clone(), direction: dir });
    }

    let topological = polyhedral::inner_radius(h).is_some_and(|(s, _)| s > 1e-12);
    let proper = match (&feasible, h.items().first()) {
        (Some(x), Some(it)) => {
            let out = linalg::axpy(x, -(it.slack(x) + 1.0) / linalg::dot(&it.w, &it.w), &it.w);
            !h.contains(&out, 0.0)
        }
        _ => false,
    };
    ValidationReport { positivity, negativity, topological, proper, nonempty, witnesses }
}

fn validate_oracle(spec: &SubequationSpec, o: &OracleSet, k: usize, seed: u64) -> ValidationReport {
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Ok(samples) = o.boundary_biased_samples(&mut rng, k.max(1)) else {
        return ValidationReport {
            positivity: false,
            negativity: false,
            topological: false,
            proper: false,
            nonempty: false,
            witnesses: Vec::new(),
        };
    };
    let mut witnesses = Vec::new();
    let mut positivity = true;
    let mut negativity = true;
    for x in &samples {
        let e = random_unit(&mut rng, n);
        let t = 10f64.powf(rng.gen_range(-3.0..3.0));
        let dir = Jet2::hessian(jet_space::rank_one_projector(&e).expect("unit").scaled(t)).to_vector();
        if positivity && !o.contains(&linalg::add(x, &dir)) {
            positivity = false;
            witnesses.push(AxiomWitness { axiom: "positivity", jet: x.clone(), direction: dir });
        }
        let mut down = vec![0.0; jet_dim(n)];
        down[0] = -t;
        if negativity && !o.contains(&linalg::add(x, &down)) {
            negativity = false;
            witnesses.push(AxiomWitness { axiom: "negativity", jet: x.clone(), direction: down });
        }
    }
    // an interior member: a small ball around it stays inside
    let topological = o.interior_point(&mut rng).is_ok_and(|c| {
        (0..2 * o.dim()).all(|i| {
            let mut y = c.clone();
            y[i / 2] += if i % 2 == 0 { 1e-6 } else { -1e-6 };
            o.contains(&y)
        })
    });
    let proper = (0..4 * k.max(16)).any(|_| {
        let y: Vec<f64> = (0..o.dim())
            .map(|i| o.lo[i] + (o.hi[i] - o.lo[i]) * (rng.gen::<f64>() * 3.0 - 1.0))
            .collect();
        !o.contains(&y)
    });
    ValidationReport { positivity, negativity, topological, proper, nonempty: true, witnesses }
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let nn = linalg::norm(&g);
        if nn > 1e-3 && nn <= 1.0 {
            return linalg::scale(&g, 1.0 / nn);
        }
    }
}

#[derive(Debug, Clone)]
pub enum Fibre {
    Empty,
    /// Convex set over packed-symmetric coordinates of Sym(Rⁿ).
    Set(ConvexSetRep),
}

/// `F_{r,p} = {A : (r, p, A) ∈ F}`.
pub fn fibre(spec: &SubequationSpec, r: f64, p: &[f64]) -> Result<Fibre> {
    let n = spec.n;
    if p.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: p.len() });
    }
    let m = packed_len(n);
    match &spec.rep {
        ConvexSetRep::HRep(h) => {
            let mut items = Vec::new();
            for it in h.items() {
                let wa = it.w[1 + n..].to_vec();
                let rhs = it.lambda - it.w[0] * r - linalg::dot(&it.w[1..1 + n], p);
                if linalg::norm(&wa) <= 1e-12 {
                    if rhs > 1e-12 {
                        return Ok(Fibre::Empty);
                    }
                    continue;
                }
                items.push(HalfSpace { w: wa, lambda: rhs });
            }
            let f = HalfSpaceList::new(m, items)?;
            if f.is_empty() {
                return Ok(Fibre::Empty);
            }
            Ok(Fibre::Set(ConvexSetRep::HRep(f)))
        }
        _ => {
            let full = spec.rep.clone();
            let head: Vec<f64> = std::iter::once(r).chain(p.iter().copied()).collect();
            let (lo, hi) = match &spec.rep {
                ConvexSetRep::Oracle(o) => (o.lo[1 + n..].to_vec(), o.hi[1 + n..].to_vec()),
                _ => (vec![-1.0; m], vec![1.0; m]),
            };
            let h2 = head.clone();
            let o = OracleSet::new(
                m,
                move |a: &[f64]| {
                    let mut v = h2.clone();
                    v.extend_from_slice(a);
                    full.contains(&v, 1e-10)
                },
                lo,
                hi,
                format!("fibre({})", spec.name),
            )?;
            let mut rng = ChaCha8Rng::seed_from_u64(0xf1b2e);
            if o.interior_point(&mut rng).is_err() {
                return Ok(Fibre::Empty);
            }
            Ok(Fibre::Set(ConvexSetRep::Oracle(o)))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompletenessReport {
    pub complete: bool,
    pub common_kernel: Subspace,
    pub witness_e: Option<Vec<f64>>,
    pub reduced_subspace: Subspace,
    /// Independent verdict from `P_e ∈ Edge(F)` on sampled unit vectors.
    pub edge_cross_check: bool,
    /// Whether two distinct nonempty fibres give the same verdict
    /// (`None` when fewer than two nonempty fibres were found).
    pub fibre_consistent: Option<bool>,
}

/// Kernel of `Σ B_j²` where `B_j` are the Hessian blocks of `vectors`
/// (jet or packed-symmetric coordinates).
fn hessian_kernel(n: usize, vectors: &[Vec<f64>], offset: usize) -> Subspace {
    let mut sum = vec![0.0; n * n];
    let mut scale = 0.0f64;
    for v in vectors {
        let b = SymMatrix::from_coords(n, &v[offset..]).expect("packed length");
        let full = b.full();
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..n).map(|k| full[i * n + k] * full[k * n + j]).sum();
                sum[i * n + j] += s;
            }
        }
        scale = scale.max(full.iter().map(|x| x * x).sum::<f64>());
    }
    kernel_of(&sum, n, scale)
}

fn kernel_of(m: &[f64], n: usize, scale: f64) -> Subspace {
    let eig = linalg::jacobi_eigen(m, n, 1e-14);
    let tol = KERNEL_TOL * scale.max(1.0);
    let basis: Vec<Vec<f64>> = eig
        .values
        .iter()
        .zip(&eig.vectors)
        .filter(|(v, _)| v.abs() <= tol)
        .map(|(_, e)| e.clone())
        .collect();
    Subspace::spanned_by(n, &basis)
}

/// Common kernel of the principal symbols.
fn common_kernel(spec: &SubequationSpec, cfg: &ConeConfig) -> Result<Subspace> {
    let n = spec.n;
    match spec.halfspaces() {
        Some(items) => {
            // ker(Σ a_i) = ∩ ker(a_i) for PSD a_i
            let mut sum = SymMatrix::zeros(n);
            for it in &items {
                sum = sum.plus(&it.operator.a);
            }
            let scale = sum.full().iter().map(|x| x.abs()).fold(0.0, f64::max);
            Ok(kernel_of(&sum.full(), n, scale))
        }
        None => {
            // every containing functional has a PSD symbol, so the kernel is
            // the joint kernel of the Hessian blocks of a dual-span basis
            let span = cone::dual_span(&spec.rep, cfg)?;
            Ok(hessian_kernel(n, &span.basis, 1 + n))
        }
    }
}

pub fn second_order_complete(spec: &SubequationSpec, cfg: &ConeConfig) -> Result<CompletenessReport> {
    let n = spec.n;
    if let Some(items) = spec.halfspaces() {
        if let Some(bad) = items.iter().find(|it| min_eigenvalue(&it.operator.a) < -1e-10) {
            return Err(Error::PositivityFailure(format!(
                "symbol with minimum eigenvalue {:.3e}",
                min_eigenvalue(&bad.operator.a)
            )));
        }
    }
    let kernel = common_kernel(spec, cfg)?;
    let complete = kernel.dim() == 0;
    let witness_e = kernel.basis.first().cloned();

    // P_e ∈ Edge(F) for sampled e, plus the kernel basis itself
    let edge = cone::edge(&spec.rep, cfg)?;
    let in_edge = |e: &[f64]| {
        let pe = jet_space::rank_one_projector(e).expect("unit");
        edge.contains(&Jet2::hessian(pe).to_vector(), 1e-8)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xc0de);
    let mut edge_cross_check = kernel.basis.iter().all(|e| in_edge(e));
    for _ in 0..64 {
        let e = random_unit(&mut rng, n);
        if kernel.contains(&e, 1e-9) != in_edge(&e) {
            edge_cross_check = false;
        }
    }

    let fibre_consistent = fibre_verdicts(spec, cfg)?;
    Ok(CompletenessReport {
        complete,
        reduced_subspace: kernel.complement(),
        common_kernel: kernel,
        witness_e,
        edge_cross_check,
        fibre_consistent,
    })
}

/// Completeness verdicts of two distinct nonempty fibres.
fn fibre_verdicts(spec: &SubequationSpec, cfg: &ConeConfig) -> Result<Option<bool>> {
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xf1b);
    let mut verdicts = Vec::new();
    let mut heads: Vec<(f64, Vec<f64>)> = Vec::new();
    if let ConvexSetRep::HRep(h) = &spec.rep {
        if let Some(x) = h.feasible_point() {
            heads.push((x[0], x[1..1 + n].to_vec()));
        }
    }
    for _ in 0..8 {
        heads.push((rng.gen_range(-2.0..2.0), (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()));
    }
    for (r, p) in heads {
        if verdicts.len() == 2 {
            break;
        }
        let Fibre::Set(f) = fibre(spec, r, &p)? else { continue };
        let kernel = match &f {
            ConvexSetRep::HRep(h) => {
                let mut sum = SymMatrix::zeros(n);
                for it in h.items() {
                    sum = sum.plus(&SymMatrix::from_coords(n, &it.w)?);
                }
                let scale = sum.full().iter().map(|x| x.abs()).fold(0.0, f64::max);
                kernel_of(&sum.full(), n, scale)
            }
            _ => hessian_kernel(n, &cone::dual_span(&f, cfg)?.basis, 0),
        };
        verdicts.push(kernel.dim() == 0);
    }
    Ok((verdicts.len() == 2).then(|| verdicts[0] == verdicts[1]))
}

/// Minimal `W ⊂ Rⁿ` such that membership depends only on `A|_W`.
pub fn fewer_variables(spec: &SubequationSpec, cfg: &ConeConfig) -> Result<Subspace> {
    Ok(common_kernel(spec, cfg)?.complement())
}

#[derive(Debug, Clone, Serialize)]
pub struct StableSample {
    pub operator: JetOperator,
    pub lambda: f64,
    pub min_symbol_eigenvalue: f64,
}

impl StableSample {
    pub fn halfspace(&self) -> JetHalfSpace {
        JetHalfSpace { operator: self.operator.clone(), lambda: self.lambda }
    }
}

/// `k` stable operators with the default weight floor `0.1`.
pub fn sample_stable(spec: &SubequationSpec, k: usize, seed: u64) -> Result<Vec<StableSample>> {
    sample_stable_with_floor(spec, k, seed, 0.1)
}

/// Stable operators with weights drawn uniformly from `[floor, 1]`.
///
/// For H-rep specs `L = Σ μ_i L_i`, `λ_L = Σ μ_i λ_i` with `Σ μ_i = 1`.
/// For the PSD builtin the symbol is `μ P_e + η I` with `μ ∈ [floor, 1]`
/// and `η = floor / 10`, which is positive definite and hence stable.
pub fn sample_stable_with_floor(spec: &SubequationSpec, k: usize, seed: u64, floor: f64) -> Result<Vec<StableSample>> {
    if !(floor > 0.0 && floor <= 1.0) {
        return Err(Error::Invalid(format!("weight floor {floor} outside (0, 1]")));
    }
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(k);
    match (&spec.kind, spec.halfspaces()) {
        (_, Some(items)) => {
            if items.is_empty() {
                return Err(Error::Unsupported("whole space has no containing operators".into()));
            }
            for _ in 0..k {
                let mu: Vec<f64> = items.iter().map(|_| rng.gen_range(floor..=1.0)).collect();
                let total: f64 = mu.iter().sum();
                let mut op = items[0].operator.scaled(0.0);
                let mut lambda = 0.0;
                for (m, it) in mu.iter().zip(&items) {
                    op = op.plus(&it.operator.scaled(m / total));
                    lambda += m / total * it.lambda;
                }
                let min_symbol_eigenvalue = min_eigenvalue(&op.a);
                out.push(StableSample { operator: op, lambda, min_symbol_eigenvalue });
            }
        }
        (SpecKind::BuiltinPsd, None) => {
            for _ in 0..k {
                let e = random_unit(&mut rng, n);
                let mu = rng.gen_range(floor..=1.0);
                let a = jet_space::rank_one_projector(&e)?.scaled(mu).plus(&SymMatrix::identity(n).scaled(0.1 * floor));
                let min_symbol_eigenvalue = min_eigenvalue(&a);
                out.push(StableSample { operator: JetOperator::second_order(a), lambda: 0.0, min_symbol_eigenvalue });
            }
        }
        _ => return Err(Error::Unsupported("oracle spec without a generator cone".into())),
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct OutsideVerdict {
    pub excluded: bool,
    pub escalations: usize,
    pub samples_used: usize,
    /// Most negative slack found.
    pub worst_slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    /// Indices of inside jets violating some sampled half-space.
    pub inside_violations: Vec<usize>,
    pub outside: Vec<OutsideVerdict>,
}

impl DecompositionReport {
    pub fn passes(&self) -> bool {
        self.inside_violations.is_empty() && self.outside.iter().all(|o| o.excluded)
    }
}

/// Largest escalation level: `2¹⁰ k` samples.
pub const MAX_ESCALATIONS: usize = 10;

/// Checks `F = ∩ H(L, λ_L)` over sampled stable half-spaces. Outside jets
/// not excluded by `stable` get fresh batches of `2^j k` samples with the
/// weight floor shrunk by `10^-j`.
pub fn decomposition_check(
    spec: &SubequationSpec,
    stable: &[StableSample],
    inside: &[Jet2],
    outside: &[Jet2],
    seed: u64,
) -> Result<DecompositionReport> {
    let inside_violations: Vec<usize> = inside
        .par_iter()
        .enumerate()
        .filter_map(|(i, j)| {
            stable
                .iter()
                .any(|s| s.halfspace().slack(j).map_or(true, |v| v < -1e-9))
                .then_some(i)
        })
        .collect();
    let k = stable.len().max(1);
    let outside = outside
        .par_iter()
        .enumerate()
        .map(|(idx, j)| -> Result<OutsideVerdict> {
            let worst = |set: &[StableSample]| -> Result<f64> {
                set.iter().map(|s| s.halfspace().slack(j)).try_fold(f64::INFINITY, |m, v| Ok(m.min(v?)))
            };
            let mut w = worst(stable)?;
            let mut used = stable.len();
            let mut level = 0;
            while w > -1e-9 && level < MAX_ESCALATIONS {
                level += 1;
                let batch = sample_stable_with_floor(
                    spec,
                    k << level,
                    seed ^ ((idx as u64) << 8) ^ level as u64,
                    0.1 * 0.1f64.powi(level as i32),
                )?;
                used += batch.len();
                w = w.min(worst(&batch)?);
            }
            Ok(OutsideVerdict { excluded: w <= -1e-9, escalations: level, samples_used: used, worst_slack: w })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecompositionReport { inside_violations, outside })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ConeConfig {
        ConeConfig::default()
    }

    fn hs(c: f64, b: Vec<f64>, a: SymMatrix, lambda: f64) -> JetHalfSpace {
        JetHalfSpace::new(JetOperator::new(c, b, a).unwrap(), lambda).unwrap()
    }

    #[test]
    fn parse_spec_files() {
        let s = SubequationSpec::parse_json(
            r#"{"n": 2, "kind": "halfspace_list", "halfspaces": [{"a": [1, 0, 0], "b": [0, 0], "c": 0, "lambda": 0}]}"#,
        )
        .unwrap();
        assert!(s.contains(&Jet2::new(0.0, vec![0.0, 0.0], SymMatrix::diag(&[1.0, -5.0])).unwrap(), 0.0));
        assert!(!s.contains(&Jet2::new(0.0, vec![0.0, 0.0], SymMatrix::diag(&[-1.0, 5.0])).unwrap(), 0.0));
        let lap = SubequationSpec::parse_json(r#"{"n": 3, "kind": "builtin_laplacian"}"#).unwrap();
        assert_eq!(lap.rep.dim(), jet_dim(3));
        assert_eq!(SubequationSpec::parse_json(r#"{"n": 2, "kind": "builtin_psd"}"#).unwrap().kind, SpecKind::BuiltinPsd);
        for bad in [
            "",
            "{",
            r#"{"n": 2, "kind": "nope"}"#,
            r#"{"n": 2, "kind": "builtin_psd", "extra": 1}"#,
            r#"{"n": 2, "kind": "halfspace_list", "halfspaces": [{"a": [1, 0]}]}"#,
            r#"{"n": 0, "kind": "builtin_laplacian"}"#,
        ] {
            assert!(SubequationSpec::parse_json(bad).is_err(), "{bad}");
        }
        let e = SubequationSpec::parse_json("{\n  \"n\": 2,\n  \"kind\": }").unwrap_err();
        assert!(matches!(&e, Error::Parse(m) if m.contains("line 3")), "{e:?}");
    }

    #[test]
    fn validate_examples() {
        let lap = SubequationSpec::laplacian(2);
        assert!(validate(&lap, 16, 1).all_pass());

        let pos_c = SubequationSpec::from_halfspaces(2, &[hs(1.0, vec![0.0; 2], SymMatrix::identity(2), 0.0)], "c+").unwrap();
        let r = validate(&pos_c, 16, 1);
        assert!(!r.negativity && r.positivity);

        let bad = SubequationSpec::from_halfspaces(2, &[hs(0.0, vec![0.0; 2], SymMatrix::diag(&[1.0, -1.0]), 0.0)], "x").unwrap();
        let r = validate(&bad, 16, 1);
        assert!(!r.positivity);
        let w = &r.witnesses[0];
        assert!(bad.rep.contains(&w.jet, 1e-9));
        assert!(!bad.rep.contains(&linalg::add(&w.jet, &w.direction), 1e-9));
        // the direction is a positive multiple of P_{e₂}
        let d = Jet2::from_vector(2, &w.direction).unwrap();
        assert!(d.a.get(0, 0).abs() < 1e-9 && d.a.get(1, 1) > 0.0);

        let psd = SubequationSpec::builtin_psd(2);
        assert!(validate(&psd, 32, 3).all_pass());
    }

    #[test]
    fn fibre_examples() {
        let lap = SubequationSpec::laplacian(2);
        match fibre(&lap, 5.0, &[1.0, -2.0]).unwrap() {
            Fibre::Set(ConvexSetRep::HRep(h)) => {
                assert_eq!(h.items().len(), 1);
                assert_eq!(h.items()[0].lambda, 0.0);
                assert!(h.contains(&SymMatrix::diag(&[1.0, -1.0]).to_coords(), 0.0));
                assert!(!h.contains(&SymMatrix::diag(&[1.0, -1.5]).to_coords(), 0.0));
            }
            other => panic!("{other:?}"),
        }
        let s = SubequationSpec::from_halfspaces(2, &[hs(-1.0, vec![0.0; 2], SymMatrix::identity(2), 0.0)], "s").unwrap();
        match fibre(&s, 3.0, &[0.0, 0.0]).unwrap() {
            // -r + tr A ≥ 0 at r = 3
            Fibre::Set(ConvexSetRep::HRep(h)) => assert_eq!(h.items()[0].lambda, 3.0),
            other => panic!("{other:?}"),
        }
        // a first-order constraint can empty a fibre
        let f = SubequationSpec::from_halfspaces(
            2,
            &[hs(0.0, vec![1.0, 0.0], SymMatrix::zeros(2), 1.0), hs(0.0, vec![0.0; 2], SymMatrix::identity(2), 0.0)],
            "f",
        )
        .unwrap();
        assert!(matches!(fibre(&f, 0.0, &[0.0, 0.0]).unwrap(), Fibre::Empty));
        let psd = SubequationSpec::builtin_psd(2);
        match fibre(&psd, -4.0, &[3.0, 1.0]).unwrap() {
            Fibre::Set(f) => {
                assert!(f.contains(&SymMatrix::diag(&[1.0, 0.0]).to_coords(), 0.0));
                assert!(!f.contains(&SymMatrix::diag(&[1.0, -0.1]).to_coords(), 0.0));
            }
            Fibre::Empty => panic!("nonempty"),
        }
    }

    #[test]
    fn completeness_examples() {
        let a11 = SubequationSpec::diagonal(2, &[0]).unwrap();
        let r = second_order_complete(&a11, &cfg()).unwrap();
        assert!(!r.complete && r.edge_cross_check);
        let e = r.witness_e.unwrap();
        assert!(e[0].abs() < 1e-12 && (e[1].abs() - 1.0).abs() < 1e-12);
        assert_eq!(r.fibre_consistent, Some(true));

        let both = SubequationSpec::diagonal(2, &[0, 1]).unwrap();
        let r = second_order_complete(&both, &cfg()).unwrap();
        assert!(r.complete && r.edge_cross_check && r.witness_e.is_none());

        let lap = SubequationSpec::laplacian(3);
        assert!(second_order_complete(&lap, &cfg()).unwrap().complete);

        let psd = SubequationSpec::builtin_psd(2);
        let r = second_order_complete(&psd, &cfg()).unwrap();
        assert!(r.complete && r.edge_cross_check, "{r:?}");

        let bad = SubequationSpec::from_halfspaces(2, &[hs(0.0, vec![0.0; 2], SymMatrix::diag(&[1.0, -1.0]), 0.0)], "x").unwrap();
        assert!(matches!(second_order_complete(&bad, &cfg()), Err(Error::PositivityFailure(_))));
    }

    #[test]
    fn fewer_variables_examples() {
        let a11 = SubequationSpec::diagonal(2, &[0]).unwrap();
        let w = fewer_variables(&a11, &cfg()).unwrap();
        assert_eq!(w.dim(), 1);
        assert!(w.contains(&[1.0, 0.0], 1e-12));
        // membership only sees A restricted to W
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let a = SymMatrix::new(2, (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let b = SymMatrix::new(2, vec![a.get(0, 0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)]).unwrap();
            assert_eq!(a11.contains(&Jet2::hessian(a), 0.0), a11.contains(&Jet2::hessian(b), 0.0));
        }
        assert_eq!(fewer_variables(&SubequationSpec::laplacian(2), &cfg()).unwrap().dim(), 2);
        let first = SubequationSpec::from_halfspaces(2, &[hs(-1.0, vec![1.0, 0.0], SymMatrix::zeros(2), 0.0)], "p").unwrap();
        assert_eq!(fewer_variables(&first, &cfg()).unwrap().dim(), 0);
    }

    #[test]
    fn stable_sampling_examples() {
        let both = SubequationSpec::diagonal(2, &[0, 1]).unwrap();
        for s in sample_stable(&both, 20, 5).unwrap() {
            let a = &s.operator.a;
            assert!(a.get(0, 1).abs() < 1e-15);
            assert!((s.min_symbol_eigenvalue - a.get(0, 0).min(a.get(1, 1))).abs() < 1e-12);
            assert!(s.min_symbol_eigenvalue > 0.0);
            assert!(cone::stab_membership(&s.operator.to_vector(), &both.rep, &cfg()).unwrap());
        }
        for s in sample_stable(&SubequationSpec::laplacian(2), 10, 6).unwrap() {
            let t = s.operator.a.get(0, 0);
            assert!(t > 0.0 && (s.operator.a.get(1, 1) - t).abs() < 1e-15 && s.operator.a.get(0, 1) == 0.0);
        }
        for s in sample_stable(&SubequationSpec::diagonal(2, &[0]).unwrap(), 10, 7).unwrap() {
            assert!(s.min_symbol_eigenvalue.abs() < 1e-15);
        }
        let psd = SubequationSpec::builtin_psd(2);
        for s in sample_stable(&psd, 3, 8).unwrap() {
            assert!(s.min_symbol_eigenvalue > 0.0);
            assert!(cone::stab_membership(&s.operator.to_vector(), &psd.rep, &cfg()).unwrap());
        }
    }

    #[test]
    fn decomposition_examples() {
        let psd = SubequationSpec::builtin_psd(2);
        let stable = sample_stable(&psd, 50, 9).unwrap();
        let inside: Vec<Jet2> = (0..20)
            .map(|i| {
                let t = i as f64 * 0.3;
                Jet2::hessian(jet_space::rank_one_projector(&[t.cos(), t.sin()]).unwrap().scaled(1.0 + t))
            })
            .collect();
        let outside = vec![Jet2::hessian(SymMatrix::diag(&[1.0, -1.0]))];
        let r = decomposition_check(&psd, &stable, &inside, &outside, 10).unwrap();
        assert!(r.passes(), "{r:?}");

        let lap = SubequationSpec::laplacian(2);
        let stable = sample_stable(&lap, 10, 11).unwrap();
        let out = Jet2::hessian(SymMatrix::diag(&[-0.5, -0.5]));
        for s in &stable {
            assert!(s.halfspace().slack(&out).unwrap() < 0.0);
        }
        let r = decomposition_check(&lap, &stable, &[], &[out], 12).unwrap();
        assert_eq!(r.outside[0].escalations, 0);
    }
}
