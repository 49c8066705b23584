//! Time-ordered propagation, its adiabatic approximation, the fidelity gap
//! between them and an adiabatic-theorem lower bound on that gap.
//!
//! Both propagators work on a uniform grid. The exact one is a product of
//! `exp(-i Δτ H(τ_n + Δτ/2))` factors. The adiabatic one diagonalises `H` at
//! every node and midpoint, follows each labelled eigenvector by overlap, and
//! accumulates per-level dynamical phases with Simpson's rule. Geometric
//! (Berry) phases are not included; the adiabatic form used here has none.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_normalized, hermitian_eig, inner, ComplexMatrix, HermitianEig, C64, ZERO};
use crate::model::SensorModel;
use crate::signal::Waveform;
use crate::spectrum::{pair_input_state, reference_basis, EigenPair};
use crate::tolerances;

/// Uniform grid of `steps` intervals on `[t0, t1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("time grid needs at least one step".into()));
        }
        if !(t0 < t1) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::InvalidArgument(format!("time grid needs t0 < t1, got [{t0}, {t1}]")));
        }
        Ok(Self { t0, t1, steps })
    }

    pub fn over(w: &Waveform, steps: usize) -> Result<Self> {
        Self::new(w.window.0, w.window.1, steps)
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.steps as f64
    }

    pub fn node(&self, n: usize) -> f64 {
        if n == self.steps {
            self.t1
        } else {
            self.t0 + n as f64 * self.dt()
        }
    }

    pub fn midpoint(&self, n: usize) -> f64 {
        self.t0 + (n as f64 + 0.5) * self.dt()
    }

    pub fn refined(&self) -> Self {
        Self { steps: self.steps * 2, ..*self }
    }
}

/// `H(t) = H₀ + b(t) C` with the coupling `C` fixed by the drive direction.
#[derive(Clone, Debug)]
pub struct Drive {
    pub bare: ComplexMatrix,
    pub coupling: ComplexMatrix,
    pub waveform: Waveform,
}

impl Drive {
    pub fn new(model: &SensorModel, waveform: &Waveform) -> Result<Self> {
        Ok(Self {
            bare: model.bare_hamiltonian().clone(),
            coupling: model.coupling_along(waveform.direction)?,
            waveform: waveform.clone(),
        })
    }

    /// Two independent copies: `H ⊗ I + I ⊗ H`.
    pub fn two_copies(&self) -> Self {
        let id = ComplexMatrix::identity(self.bare.dim());
        let sum = |m: &ComplexMatrix| &m.kron(&id) + &id.kron(m);
        Self { bare: sum(&self.bare), coupling: sum(&self.coupling), waveform: self.waveform.clone() }
    }

    pub fn dim(&self) -> usize {
        self.bare.dim()
    }

    pub fn hamiltonian(&self, t: f64) -> Result<ComplexMatrix> {
        let b = self.waveform.evaluate(t)?;
        let mut h = self.bare.clone();
        if b != 0.0 {
            h.add_scaled(&self.coupling, b);
        }
        Ok(h)
    }

    pub fn eig(&self, t: f64) -> Result<HermitianEig> {
        hermitian_eig(&self.hamiltonian(t)?)
    }

    /// Largest `|eigenvalue|` of the coupling.
    pub fn coupling_norm(&self) -> Result<f64> {
        let eig = hermitian_eig(&self.coupling)?;
        Ok(eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs())))
    }
}

fn step_unitary(eig: &HermitianEig, dt: f64, u: &ComplexMatrix) -> ComplexMatrix {
    let v = &eig.eigenvectors;
    let mut w = v.adjoint().matmul(u);
    let n = w.dim();
    for k in 0..n {
        let ph = C64::from_polar(1.0, -dt * eig.eigenvalues[k]);
        for j in 0..n {
            w[(k, j)] *= ph;
        }
    }
    v.matmul(&w)
}

fn step_state(eig: &HermitianEig, dt: f64, psi: &[C64]) -> Vec<C64> {
    let v = &eig.eigenvectors;
    let n = psi.len();
    let mut coeff = vec![ZERO; n];
    for (k, c) in coeff.iter_mut().enumerate() {
        let mut acc = ZERO;
        for i in 0..n {
            acc += v[(i, k)].conj() * psi[i];
        }
        *c = acc * C64::from_polar(1.0, -dt * eig.eigenvalues[k]);
    }
    v.apply(&coeff)
}

/// Exact propagator on `grid` with midpoint field sampling.
pub fn propagate_numeric(model: &SensorModel, w: &Waveform, grid: &TimeGrid) -> Result<ComplexMatrix> {
    propagate_drive(&Drive::new(model, w)?, grid)
}

pub fn propagate_drive(drive: &Drive, grid: &TimeGrid) -> Result<ComplexMatrix> {
    let dt = grid.dt();
    let mut u = ComplexMatrix::identity(drive.dim());
    for n in 0..grid.steps {
        u = step_unitary(&drive.eig(grid.midpoint(n))?, dt, &u);
    }
    Ok(u)
}

/// `|⟨φ|U|φ⟩|²` after exact propagation of the state alone.
pub fn numeric_survival(drive: &Drive, grid: &TimeGrid, state: &[C64]) -> Result<f64> {
    check_state(drive.dim(), state)?;
    let dt = grid.dt();
    let mut psi = state.to_vec();
    for n in 0..grid.steps {
        psi = step_state(&drive.eig(grid.midpoint(n))?, dt, &psi);
    }
    Ok(inner(state, &psi).norm_sqr().min(1.0))
}

/// Exact survival `(t, P(t))` every `every` steps, for fields that have no
/// closed-form adiabatic labels (any direction).
pub fn numeric_trajectory(drive: &Drive, grid: &TimeGrid, state: &[C64], every: usize) -> Result<Vec<(f64, f64)>> {
    check_state(drive.dim(), state)?;
    let every = every.max(1);
    let dt = grid.dt();
    let mut psi = state.to_vec();
    let mut out = vec![(grid.t0, 1.0)];
    for n in 0..grid.steps {
        psi = step_state(&drive.eig(grid.midpoint(n))?, dt, &psi);
        if (n + 1) % every == 0 || n + 1 == grid.steps {
            out.push((grid.node(n + 1), inner(state, &psi).norm_sqr().min(1.0)));
        }
    }
    Ok(out)
}

fn check_state(dim: usize, state: &[C64]) -> Result<()> {
    if state.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: state.len() });
    }
    check_normalized(state)
}

/// Minimum-cost perfect assignment on a square cost matrix (Hungarian method
/// with potentials). Returns `row -> column`.
fn assign(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        out[p[j] - 1] = j - 1;
    }
    out
}

/// Groups of (ascending) eigenvalue indices closer than the degeneracy
/// tolerance.
fn clusters(values: &[f64]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (k, &x) in values.iter().enumerate() {
        match out.last_mut() {
            Some(c) if (x - values[*c.last().unwrap()]).abs() <= tolerances::DEGENERACY * x.abs().max(1.0) => c.push(k),
            _ => out.push(vec![k]),
        }
    }
    out
}

/// Labelled eigenframe: column `j` follows label `j + 1`.
#[derive(Clone, Debug)]
pub struct Frame {
    pub vectors: ComplexMatrix,
    pub values: Vec<f64>,
}

/// Relabel `eig` to follow `prev` column by column.
///
/// Labels are assigned to eigenvalue clusters by maximal total overlap, then
/// each cluster is rotated onto the previous vectors by polar decomposition,
/// which fixes phases by parallel transport and resolves exact degeneracies.
pub fn align_frame(prev: &ComplexMatrix, eig: &HermitianEig, t: f64) -> Result<Frame> {
    let n = eig.dim();
    let v = &eig.eigenvectors;
    let groups = clusters(&eig.eigenvalues);
    let mut slot_group = vec![0; n];
    for (g, c) in groups.iter().enumerate() {
        for &k in c {
            slot_group[k] = g;
        }
    }
    // weights[j][g] = squared overlap of label j with cluster g
    let mut weights = vec![vec![0.0; groups.len()]; n];
    let prev_cols: Vec<Vec<C64>> = (0..n).map(|j| prev.column(j)).collect();
    let new_cols: Vec<Vec<C64>> = (0..n).map(|k| v.column(k)).collect();
    for j in 0..n {
        for (g, c) in groups.iter().enumerate() {
            weights[j][g] = c.iter().map(|&k| inner(&new_cols[k], &prev_cols[j]).norm_sqr()).sum();
        }
    }
    let cost: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|k| -weights[j][slot_group[k]]).collect()).collect();
    let slots = assign(&cost);

    let mut labels_in: Vec<Vec<usize>> = vec![Vec::new(); groups.len()];
    let mut worst = f64::INFINITY;
    for j in 0..n {
        let g = slot_group[slots[j]];
        labels_in[g].push(j);
        worst = worst.min(weights[j][g]);
    }
    if worst < tolerances::TRACKING_MIN_OVERLAP {
        return Err(Error::TrackingAmbiguity { t, overlap: worst });
    }

    let mut vectors = ComplexMatrix::zeros(n);
    let mut values = vec![0.0; n];
    for (g, c) in groups.iter().enumerate() {
        let labels = &labels_in[g];
        let m = c.len();
        // overlap block M[a][b] = <new_a | prev_b>
        let mut block = ComplexMatrix::zeros(m);
        for (a, &k) in c.iter().enumerate() {
            for (b, &j) in labels.iter().enumerate() {
                block[(a, b)] = inner(&new_cols[k], &prev_cols[j]);
            }
        }
        let rot = polar_unitary(&block, t)?;
        let mean = c.iter().map(|&k| eig.eigenvalues[k]).sum::<f64>() / m as f64;
        for (b, &j) in labels.iter().enumerate() {
            let mut col = vec![ZERO; n];
            for (a, &k) in c.iter().enumerate() {
                let r = rot[(a, b)];
                for (slot, x) in col.iter_mut().zip(&new_cols[k]) {
                    *slot += x * r;
                }
            }
            vectors.set_column(j, &col);
            values[j] = if m == 1 { eig.eigenvalues[c[0]] } else { mean };
        }
    }
    Ok(Frame { vectors, values })
}

/// Unitary factor `M (M†M)^{-1/2}` of a square overlap block.
fn polar_unitary(m: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    if m.dim() == 1 {
        let z = m[(0, 0)];
        if z.norm() == 0.0 {
            return Err(Error::TrackingAmbiguity { t, overlap: 0.0 });
        }
        return Ok(ComplexMatrix::from_diagonal(&[z / z.norm()]));
    }
    let gram = m.adjoint().matmul(m);
    let eig = hermitian_eig(&gram)?;
    if eig.eigenvalues[0] < tolerances::TRACKING_MIN_OVERLAP * tolerances::TRACKING_MIN_OVERLAP {
        return Err(Error::TrackingAmbiguity { t, overlap: eig.eigenvalues[0].max(0.0).sqrt() });
    }
    let inv_sqrt: Vec<f64> = eig.eigenvalues.iter().map(|x| 1.0 / x.sqrt()).collect();
    let v = &eig.eigenvectors;
    let s = v.matmul(&ComplexMatrix::from_real_diagonal(&inv_sqrt)).matmul(&v.adjoint());
    Ok(m.matmul(&s))
}

/// Labelled frames and integrated phases along a grid.
struct Tracker {
    frame: Frame,
    start: ComplexMatrix,
    phases: Vec<f64>,
}

impl Tracker {
    fn start(reference: &ComplexMatrix, eig: &HermitianEig, t: f64) -> Result<Self> {
        let frame = align_frame(reference, eig, t)?;
        let start = frame.vectors.clone();
        let phases = vec![0.0; eig.dim()];
        Ok(Self { frame, start, phases })
    }

    /// Advance one interval using the midpoint and end-node decompositions.
    fn advance(&mut self, mid: &HermitianEig, end: &HermitianEig, t_mid: f64, t_end: f64, dt: f64) -> Result<()> {
        let fm = align_frame(&self.frame.vectors, mid, t_mid)?;
        let fe = align_frame(&fm.vectors, end, t_end)?;
        for j in 0..self.phases.len() {
            self.phases[j] += dt / 6.0 * (self.frame.values[j] + 4.0 * fm.values[j] + fe.values[j]);
        }
        self.frame = fe;
        Ok(())
    }

    /// `Ψ_t e^{-iΦ} Ψ_start†`
    fn unitary(&self) -> ComplexMatrix {
        let d: Vec<C64> = self.phases.iter().map(|&p| C64::from_polar(1.0, -p)).collect();
        self.frame.vectors.matmul(&ComplexMatrix::from_diagonal(&d)).matmul(&self.start.adjoint())
    }

    /// `Ψ_t e^{-iΦ} c` for start-frame coefficients `c`.
    fn state(&self, coeff: &[C64]) -> Vec<C64> {
        let c: Vec<C64> = self.phases.iter().zip(coeff).map(|(&p, &c)| c * C64::from_polar(1.0, -p)).collect();
        self.frame.vectors.apply(&c)
    }
}

/// Adiabatic propagator on `grid`, labelled from the model's zero-field basis.
pub fn propagate_adiabatic(model: &SensorModel, w: &Waveform, grid: &TimeGrid) -> Result<ComplexMatrix> {
    let drive = Drive::new(model, w)?;
    let reference = reference_basis(model.kind());
    let dt = grid.dt();
    let mut tracker = Tracker::start(&reference, &drive.eig(grid.t0)?, grid.t0)?;
    for n in 0..grid.steps {
        let (tm, te) = (grid.midpoint(n), grid.node(n + 1));
        tracker.advance(&drive.eig(tm)?, &drive.eig(te)?, tm, te, dt)?;
    }
    Ok(tracker.unitary())
}

/// Per-label phases `∫λ_j dτ` over the grid and the labelled eigenvalues at
/// every node.
pub fn tracked_spectrum(model: &SensorModel, w: &Waveform, grid: &TimeGrid) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let drive = Drive::new(model, w)?;
    let dt = grid.dt();
    let mut tracker = Tracker::start(&reference_basis(model.kind()), &drive.eig(grid.t0)?, grid.t0)?;
    let mut nodes = vec![tracker.frame.values.clone()];
    for n in 0..grid.steps {
        let (tm, te) = (grid.midpoint(n), grid.node(n + 1));
        tracker.advance(&drive.eig(tm)?, &drive.eig(te)?, tm, te, dt)?;
        nodes.push(tracker.frame.values.clone());
    }
    Ok((tracker.phases, nodes))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: f64,
    pub survival_numeric: f64,
    pub survival_adiabatic: f64,
    pub delta: f64,
    /// `½(Φ_p − Φ_q)` from the tracked eigenvalues.
    pub phase: f64,
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub grid: TimeGrid,
    pub pair: EigenPair,
    pub unitary_numeric: ComplexMatrix,
    pub unitary_adiabatic: ComplexMatrix,
    pub checkpoints: Vec<Checkpoint>,
}

impl EvolutionResult {
    pub fn last(&self) -> &Checkpoint {
        self.checkpoints.last().expect("at least the initial checkpoint")
    }

    pub fn survival_numeric(&self) -> f64 {
        self.last().survival_numeric
    }

    pub fn survival_adiabatic(&self) -> f64 {
        self.last().survival_adiabatic
    }

    pub fn delta(&self) -> f64 {
        self.last().delta
    }

    pub fn phase(&self) -> f64 {
        self.last().phase
    }

    /// Trajectory as CSV: `t,survival_numeric,survival_adiabatic,delta,phase`.
    pub fn write_trajectory_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,survival_numeric,survival_adiabatic,delta,phase")?;
        for c in &self.checkpoints {
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt_num(c.t),
                fmt_num(c.survival_numeric),
                fmt_num(c.survival_adiabatic),
                fmt_num(c.delta),
                fmt_num(c.phase)
            )?;
        }
        Ok(())
    }
}

/// Twelve significant digits in scientific notation.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}

/// Exact and adiabatic evolution of `state` together, recording a checkpoint
/// every `checkpoint_every` steps (and always at both ends).
pub fn evolve(
    model: &SensorModel,
    w: &Waveform,
    grid: &TimeGrid,
    pair: EigenPair,
    state: &[C64],
    checkpoint_every: usize,
) -> Result<EvolutionResult> {
    pair.check(model.kind())?;
    let drive = Drive::new(model, w)?;
    check_state(drive.dim(), state)?;
    let every = checkpoint_every.max(1);
    let dt = grid.dt();
    let mut tracker = Tracker::start(&reference_basis(model.kind()), &drive.eig(grid.t0)?, grid.t0)?;
    let coeff = tracker.start.adjoint().apply(state);
    let mut u = ComplexMatrix::identity(drive.dim());

    let record = |t: f64, u: &ComplexMatrix, tracker: &Tracker| -> Checkpoint {
        let psi_num = u.apply(state);
        let psi_ad = tracker.state(&coeff);
        let sn = inner(state, &psi_num).norm_sqr();
        let sa = inner(state, &psi_ad).norm_sqr();
        let fid = inner(&psi_num, &psi_ad).norm_sqr();
        Checkpoint {
            t,
            survival_numeric: sn,
            survival_adiabatic: sa,
            delta: (1.0 - fid).clamp(0.0, 1.0),
            phase: 0.5 * (tracker.phases[pair.p - 1] - tracker.phases[pair.q - 1]),
        }
    };

    let mut checkpoints = vec![record(grid.t0, &u, &tracker)];
    for n in 0..grid.steps {
        let (tm, te) = (grid.midpoint(n), grid.node(n + 1));
        let mid = drive.eig(tm)?;
        u = step_unitary(&mid, dt, &u);
        tracker.advance(&mid, &drive.eig(te)?, tm, te, dt)?;
        if (n + 1) % every == 0 || n + 1 == grid.steps {
            checkpoints.push(record(te, &u, &tracker));
        }
    }
    Ok(EvolutionResult { grid: *grid, pair, unitary_numeric: u, unitary_adiabatic: tracker.unitary(), checkpoints })
}

/// `δ = 1 − |⟨ψ_numeric|ψ_adiabatic⟩|²` at the end of the grid.
pub fn adiabatic_delta(model: &SensorModel, w: &Waveform, grid: &TimeGrid, state: &[C64]) -> Result<f64> {
    let pair = EigenPair::default_for(model.kind());
    Ok(evolve(model, w, grid, pair, state, grid.steps)?.delta())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapMode {
    /// One gap, the smallest over the region, with the largest derivatives.
    Min,
    /// Bound evaluated at every grid node with the local gap; maximum taken.
    Pointwise,
}

/// How the spectral gap entering the adiabatic bound is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapPolicy {
    /// Only nodes with `|b(t)|` above this take part.
    pub threshold: f64,
    pub mode: GapMode,
    /// Use this gap instead of measuring one.
    pub fixed: Option<f64>,
    /// Gaps below this are rejected.
    pub floor: f64,
}

impl Default for GapPolicy {
    fn default() -> Self {
        Self { threshold: 0.05, mode: GapMode::Min, fixed: None, floor: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticBound {
    /// Lower bound on `δ²`.
    pub delta_sq: f64,
    pub gamma: f64,
    /// Node time where the maximum was attained (NaN when the region is empty).
    pub t_max: f64,
    pub term_slope: f64,
    pub term_curvature: f64,
}

impl AdiabaticBound {
    fn zero() -> Self {
        Self { delta_sq: 0.0, gamma: f64::INFINITY, t_max: f64::NAN, term_slope: 0.0, term_curvature: 0.0 }
    }
}

/// The two terms `(10⁵/T)(‖H₁‖T|b′|)³/γ⁴` and `(10⁵/T)‖H₁‖²T³|b′b″|/γ³`.
pub fn bound_terms(norm: f64, duration: f64, b1: f64, b2: f64, gamma: f64) -> (f64, f64) {
    let pre = 1e5 / duration;
    let slope = pre * (norm * duration * b1.abs()).powi(3) / gamma.powi(4);
    let curvature = pre * norm * norm * duration.powi(3) * (b1 * b2).abs() / gamma.powi(3);
    (slope, curvature)
}

/// Adiabatic-theorem lower bound on `δ²` for `pair` over the grid nodes.
pub fn adiabatic_bound(
    model: &SensorModel,
    w: &Waveform,
    grid: &TimeGrid,
    pair: EigenPair,
    policy: &GapPolicy,
) -> Result<AdiabaticBound> {
    pair.check(model.kind())?;
    let drive = Drive::new(model, w)?;
    let norm = drive.coupling_norm()?;
    let duration = grid.t1 - grid.t0;

    let mut region: Vec<usize> = Vec::new();
    for n in 0..=grid.steps {
        if w.evaluate(grid.node(n))?.abs() > policy.threshold {
            region.push(n);
        }
    }
    if region.is_empty() {
        return Ok(AdiabaticBound::zero());
    }

    let gaps: Vec<f64> = match policy.fixed {
        Some(g) => vec![g; grid.steps + 1],
        None => {
            let (_, nodes) = tracked_spectrum(model, w, grid)?;
            nodes.iter().map(|vals| pair_gap(vals, pair)).collect()
        }
    };
    let derivs: Vec<(f64, f64)> = region
        .iter()
        .map(|&n| {
            let t = grid.node(n);
            Ok((w.derivative(t, 1)?, w.derivative(t, 2)?))
        })
        .collect::<Result<_>>()?;

    let (gmin, gmin_at) =
        region.iter().map(|&n| (gaps[n], n)).fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a });
    if gmin < policy.floor {
        return Err(Error::GapBelowFloor { gap: gmin, floor: policy.floor, t: grid.node(gmin_at) });
    }

    let mut best = AdiabaticBound::zero();
    best.gamma = gmin;
    match policy.mode {
        GapMode::Min => {
            let (mut s_max, mut c_max, mut s_at, mut c_at) = (0.0f64, 0.0f64, region[0], region[0]);
            for (&n, &(b1, b2)) in region.iter().zip(&derivs) {
                if b1.abs() > s_max {
                    s_max = b1.abs();
                    s_at = n;
                }
                if (b1 * b2).abs() > c_max {
                    c_max = (b1 * b2).abs();
                    c_at = n;
                }
            }
            let (slope, curvature) = bound_terms(norm, duration, s_max, c_max, gmin);
            best.term_slope = slope;
            best.term_curvature = curvature;
            best.delta_sq = slope.max(curvature);
            best.t_max = grid.node(if slope >= curvature { s_at } else { c_at });
        }
        GapMode::Pointwise => {
            for (&n, &(b1, b2)) in region.iter().zip(&derivs) {
                let (slope, curvature) = bound_terms(norm, duration, b1, b2, gaps[n]);
                let v = slope.max(curvature);
                if v > best.delta_sq || best.t_max.is_nan() {
                    best = AdiabaticBound {
                        delta_sq: v,
                        gamma: gaps[n],
                        t_max: grid.node(n),
                        term_slope: slope,
                        term_curvature: curvature,
                    };
                }
            }
        }
    }
    Ok(best)
}

/// Distance from either label of the pair to the nearest other eigenvalue.
fn pair_gap(values: &[f64], pair: EigenPair) -> f64 {
    let mut g = f64::INFINITY;
    for label in [pair.p - 1, pair.q - 1] {
        for (k, &x) in values.iter().enumerate() {
            if k != label {
                g = g.min((x - values[label]).abs());
            }
        }
    }
    g
}

/// Outcome of grid doubling: the accepted grid and each `(steps, survival)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub grid: TimeGrid,
    pub history: Vec<(usize, f64)>,
}

/// Double the step count from `initial_steps` until the final numeric
/// survival of the pair's input state moves by less than the refinement
/// tolerance; the coarser of the last two grids is returned.
pub fn refine_until_converged(model: &SensorModel, w: &Waveform, initial_steps: usize) -> Result<TimeGrid> {
    let pair = EigenPair::default_for(model.kind());
    let state = pair_input_state(model.kind(), pair)?;
    Ok(refine_with(&Drive::new(model, w)?, &state, initial_steps, tolerances::REFINEMENT)?.grid)
}

pub fn refine_with(drive: &Drive, state: &[C64], initial_steps: usize, tol: f64) -> Result<Refinement> {
    if initial_steps < 16 {
        return Err(Error::InvalidArgument(format!("initial_steps must be at least 16, got {initial_steps}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("refinement tolerance must be positive, got {tol}")));
    }
    let mut grid = TimeGrid::over(&drive.waveform, initial_steps)?;
    let mut prev = numeric_survival(drive, &grid, state)?;
    let mut history = vec![(grid.steps, prev)];
    loop {
        let finer = grid.refined();
        if finer.steps > tolerances::REFINEMENT_MAX_STEPS {
            let last = history.windows(2).last().map(|w| (w[1].1 - w[0].1).abs()).unwrap_or(f64::NAN);
            return Err(Error::NotConverged { steps: grid.steps, last_change: last });
        }
        let cur = numeric_survival(drive, &finer, state)?;
        history.push((finer.steps, cur));
        if (cur - prev).abs() < tol {
            return Ok(Refinement { grid, history });
        }
        grid = finer;
        prev = cur;
    }
}

/// Observed convergence order from three survivals on grids `n, 2n, 4n`.
pub fn observed_order(p_n: f64, p_2n: f64, p_4n: f64) -> f64 {
    ((p_n - p_2n) / (p_2n - p_4n)).abs().log2()
}
