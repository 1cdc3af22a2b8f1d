//! The driving point process Ψ and the inhomogeneous (Ψ, c)-coalescent.
//!
//! A [`PsiPath`] is a finite list of `(time, paintbox)` atoms. Three samplers
//! run a coalescent on it:
//!
//! * [`run_flow`] composes coagulators chronologically: every atom throws the
//!   current blocks into its paintbox, and pair atoms on `[n]` arrive at rate `c`.
//! * [`run_jump_hold`] samples only effective jumps: each atom fires with its
//!   merger probability, the pair clock runs at `c * C(b, 2)`.
//! * [`run_naive`] is the discrete ε-naive chain on the generation grid of a pedigree.
//!
//! [`run_intensity`] is a jump-hold sampler driven by a catalog intensity, with
//! atoms thinned to the ones that can merge something.

use std::fmt;
use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1};
use rayon::prelude::*;
use statrs::function::beta::{beta, beta_reg, inv_beta_reg};

use crate::error::{param, Error, Result};
use crate::paintbox::{has_collision, Paintbox};
use crate::partitions::Partition;
use crate::pedigree::{l2sq_from_totals, paintbox_from_totals, CanningsModel, Pedigree, TwoSexInner};
use crate::rng::Stream;

/// One atom of Ψ.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub t: f64,
    pub x: Paintbox,
    /// Generation on the pedigree grid, for empirical paths.
    pub generation: Option<u64>,
}

/// A finite realization of Ψ on `[0, horizon]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PsiPath {
    atoms: Vec<Atom>,
    horizon: f64,
    descriptor: String,
}

impl PsiPath {
    /// Atoms must have strictly increasing times in `[0, horizon]`.
    pub fn new(atoms: Vec<Atom>, horizon: f64, descriptor: impl Into<String>) -> Result<Self> {
        if !(horizon > 0.0) {
            return param(format!("horizon must be positive, got {horizon}"));
        }
        for w in atoms.windows(2) {
            if !(w[0].t < w[1].t) {
                return Err(Error::Input(format!("atom times not strictly increasing at t = {}", w[1].t)));
            }
        }
        if let Some(a) = atoms.iter().find(|a| !(a.t >= 0.0 && a.t <= horizon)) {
            return Err(Error::Input(format!("atom time {} outside [0, {horizon}]", a.t)));
        }
        Ok(PsiPath { atoms, horizon, descriptor: descriptor.into() })
    }

    pub fn empty(horizon: f64) -> Result<Self> {
        PsiPath::new(Vec::new(), horizon, "empty")
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Keep the atoms with `||x|| >= eps`.
    pub fn epsilon_cut(&self, eps: f64) -> Result<PsiPath> {
        if !(eps > 0.0) {
            return param(format!("eps must be positive, got {eps}"));
        }
        let atoms = self.atoms.iter().filter(|a| a.x.l2sq() >= eps * eps).cloned().collect();
        Ok(PsiPath { atoms, horizon: self.horizon, descriptor: format!("{} cut {eps}", self.descriptor) })
    }

    /// `# horizon T` and `# source ...` headers, then `t w1 w2 ...` per atom, with
    /// an optional trailing `# g=<generation>`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# horizon {}", self.horizon)?;
        writeln!(w, "# source {}", self.descriptor)?;
        for a in &self.atoms {
            write!(w, "{}", a.t)?;
            for x in a.x.weights() {
                write!(w, " {x}")?;
            }
            if let Some(g) = a.generation {
                write!(w, " # g={g}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut horizon = None;
        let mut descriptor = String::from("imported");
        let mut atoms = Vec::new();
        for (k, line) in r.lines().enumerate() {
            let line = line?;
            let bad = || Error::Input(format!("line {}: cannot parse {line:?}", k + 1));
            let trimmed = line.trim();
            if let Some(rest) = trimmed.strip_prefix("# horizon ") {
                horizon = Some(rest.trim().parse::<f64>().map_err(|_| bad())?);
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix("# source ") {
                descriptor = rest.trim().to_string();
                continue;
            }
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (data, comment) = match trimmed.split_once('#') {
                Some((d, c)) => (d, Some(c.trim())),
                None => (trimmed, None),
            };
            let mut nums = data.split_whitespace().map(|s| s.parse::<f64>());
            let t = nums.next().ok_or_else(bad)?.map_err(|_| bad())?;
            let w: Vec<f64> = nums.collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
            let generation = match comment.and_then(|c| c.strip_prefix("g=")) {
                Some(g) => Some(g.parse::<u64>().map_err(|_| bad())?),
                None => None,
            };
            atoms.push(Atom { t, x: Paintbox::new(w)?, generation });
        }
        let horizon = horizon
            .or_else(|| atoms.last().map(|a: &Atom| a.t))
            .ok_or_else(|| Error::Input("path without atoms needs a horizon header".into()))?;
        PsiPath::new(atoms, horizon, descriptor)
    }
}

/// Empirical path of a pedigree: generation `g` (0-based slice index) becomes an
/// atom at time `(g + 1) c_N` with its generation paintbox. With `eps`, only atoms
/// of norm at least `eps` are kept.
pub fn empirical_path(pedigree: &Pedigree, c_n: f64, generations: u64, eps: Option<f64>) -> Result<PsiPath> {
    if !(c_n > 0.0) {
        return param(format!("c_N must be positive, got {c_n}"));
    }
    if eps.is_some_and(|e| !(e > 0.0)) {
        return param("eps must be positive");
    }
    let thr = eps.map_or(0.0, |e| e * e);
    let atoms: Vec<Atom> = (0..generations)
        .into_par_iter()
        .filter_map(|g| {
            let totals = pedigree.totals(g);
            (l2sq_from_totals(&totals) >= thr).then(|| Atom {
                t: (g + 1) as f64 * c_n,
                x: paintbox_from_totals(&totals),
                generation: Some(g + 1),
            })
        })
        .collect();
    let descriptor = match eps {
        Some(e) => format!("empirical {} N={} seed={} cut {e}", pedigree.model().name(), pedigree.n(), pedigree.seed()),
        None => format!("empirical {} N={} seed={}", pedigree.model().name(), pedigree.n(), pedigree.seed()),
    };
    PsiPath::new(atoms, generations as f64 * c_n, descriptor)
}

/// Shape of the atoms of a truncated Beta intensity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BetaFold {
    /// `(z/4, z/4)`
    Two,
    /// `(z/4, z/4, z/4, z/4)`
    Four,
}

impl BetaFold {
    fn entries(self) -> usize {
        match self {
            BetaFold::Two => 2,
            BetaFold::Four => 4,
        }
    }

    /// `<x(z), x(z)> / z^2`
    fn norm_factor(self) -> f64 {
        self.entries() as f64 / 16.0
    }
}

/// Limiting intensities.
#[derive(Clone, Debug)]
pub enum XiIntensity {
    /// Atoms with paintbox `x` at rate `rate` per unit time, plus pair rate `c_pair`.
    PointMass { rate: f64, x: Paintbox, c_pair: f64 },
    /// `Beta(2 - alpha, alpha)(dz)` pushed to atoms of the given fold, keeping `z >= eps`.
    /// The discarded mass is added to the pair rate.
    TruncatedBeta { alpha: f64, eps: f64, fold: BetaFold },
    /// No atoms, pair rate 1.
    Kingman,
    /// Atoms read off a pedigree, with a pair rate supplied by the model family.
    Empirical { pedigree: Pedigree, c_n: f64, c_pair: f64, eps: Option<f64> },
}

impl XiIntensity {
    pub fn point_mass(rate: f64, x: Paintbox, c_pair: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) || !(c_pair >= 0.0) {
            return param(format!("rate and c_pair must be nonnegative, got {rate}, {c_pair}"));
        }
        if rate > 0.0 && x.is_empty() {
            return param("point mass at the zero paintbox");
        }
        Ok(XiIntensity::PointMass { rate, x, c_pair })
    }

    /// Truncation `eps` defaults to the value putting 1% of the mass in the pair rate.
    pub fn truncated_beta(alpha: f64, eps: Option<f64>, fold: BetaFold) -> Result<Self> {
        if !(1.0..2.0).contains(&alpha) {
            return param(format!("beta alpha must lie in [1, 2), got {alpha}"));
        }
        let eps = eps.unwrap_or_else(|| default_beta_eps(alpha, 0.01));
        if !(eps > 0.0 && eps < 1.0) {
            return param(format!("beta truncation must lie in (0, 1), got {eps}"));
        }
        Ok(XiIntensity::TruncatedBeta { alpha, eps, fold })
    }

    /// Limit of a large family born to one couple with probability `N^-gamma`.
    pub fn large_family_couple(psi: f64, gamma: f64) -> Result<Self> {
        check_psi(psi, gamma)?;
        let x = Paintbox::uniform(4, psi / 4.0)?;
        Ok(if gamma < 1.0 {
            XiIntensity::PointMass { rate: 4.0 / (psi * psi), x, c_pair: 0.0 }
        } else if gamma == 1.0 {
            let d = psi * psi + 2.0;
            XiIntensity::PointMass { rate: 4.0 / d, x, c_pair: 2.0 / d }
        } else {
            XiIntensity::Kingman
        })
    }

    /// Limit of a large family of one individual with uniform partners.
    pub fn large_family_individual(psi: f64, gamma: f64) -> Result<Self> {
        check_psi(psi, gamma)?;
        let x = Paintbox::uniform(2, psi / 4.0)?;
        Ok(if gamma < 1.0 {
            XiIntensity::PointMass { rate: 8.0 / (psi * psi), x, c_pair: 0.0 }
        } else if gamma == 1.0 {
            let d = psi * psi + 4.0;
            XiIntensity::PointMass { rate: 8.0 / d, x, c_pair: 4.0 / d }
        } else {
            XiIntensity::Kingman
        })
    }

    /// Limit of the two-sex model with a star of `floor(beta N)` children at rate `lambda / N`.
    pub fn two_sex_star(r: f64, lambda: f64, beta: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0 && lambda > 0.0 && beta > 0.0 && beta <= 1.0) {
            return param(format!("two-sex star needs r in (0,1), lambda > 0, beta in (0,1], got {r}, {lambda}, {beta}"));
        }
        let h = r * (1.0 - r);
        let d = lambda * beta * beta * h + 1.0;
        Ok(XiIntensity::PointMass { rate: 8.0 * lambda * h / d, x: Paintbox::uniform(2, beta / 4.0)?, c_pair: 1.0 / d })
    }

    /// The limit of a catalog pedigree model, where one is known.
    pub fn for_model(model: &CanningsModel) -> Option<Result<Self>> {
        match *model {
            CanningsModel::WrightFisher { .. } => Some(Ok(XiIntensity::Kingman)),
            CanningsModel::LargeFamilyCouple { psi, gamma, .. } => Some(XiIntensity::large_family_couple(psi, gamma)),
            CanningsModel::LargeFamilyIndividual { psi, gamma, .. } => Some(XiIntensity::large_family_individual(psi, gamma)),
            CanningsModel::TwoSex { inner: TwoSexInner::WrightFisher, .. } => Some(Ok(XiIntensity::Kingman)),
            CanningsModel::TwoSex { r, inner: TwoSexInner::Star { lambda, beta }, .. } => {
                Some(XiIntensity::two_sex_star(r, lambda, beta))
            }
            _ => None,
        }
    }

    /// Pair merger rate outside atoms (including Beta compensation).
    pub fn c_pair(&self) -> f64 {
        match *self {
            XiIntensity::PointMass { c_pair, .. } | XiIntensity::Empirical { c_pair, .. } => c_pair,
            XiIntensity::TruncatedBeta { alpha, eps, .. } => beta_reg(2.0 - alpha, alpha, eps),
            XiIntensity::Kingman => 1.0,
        }
    }

    /// Rate of atoms per unit time (`None` for empirical paths).
    pub fn atom_rate(&self) -> Option<f64> {
        match *self {
            XiIntensity::PointMass { rate, .. } => Some(rate),
            XiIntensity::TruncatedBeta { alpha, eps, fold } => Some(beta_atom_rate(alpha, eps, fold)),
            XiIntensity::Kingman => Some(0.0),
            XiIntensity::Empirical { .. } => None,
        }
    }

    /// Rate at which a fixed pair merges through atoms.
    pub fn atom_pair_rate(&self) -> Option<f64> {
        match *self {
            XiIntensity::PointMass { rate, ref x, .. } => Some(rate * x.l2sq()),
            XiIntensity::TruncatedBeta { alpha, eps, .. } => Some(1.0 - beta_reg(2.0 - alpha, alpha, eps)),
            XiIntensity::Kingman => Some(0.0),
            XiIntensity::Empirical { .. } => None,
        }
    }

    /// Streaming atom source (not for empirical intensities).
    pub fn source(&self, rng: Stream) -> Result<PoissonSource> {
        let (rate, shape) = match *self {
            XiIntensity::PointMass { rate, ref x, .. } => (rate, AtomShape::Fixed(x.clone())),
            XiIntensity::TruncatedBeta { alpha, eps, fold } => {
                (beta_atom_rate(alpha, eps, fold), AtomShape::Beta { alpha, eps, fold })
            }
            XiIntensity::Kingman => (0.0, AtomShape::Fixed(Paintbox::empty())),
            XiIntensity::Empirical { .. } => return param("empirical intensities have no streaming source; build a path"),
        };
        Ok(PoissonSource { rate, shape, rng, t: 0.0, pending: None, current: Paintbox::empty() })
    }
}

impl fmt::Display for XiIntensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            XiIntensity::PointMass { rate, x, c_pair } => write!(f, "point_mass rate={rate} x={x} c_pair={c_pair}"),
            XiIntensity::TruncatedBeta { alpha, eps, fold } => {
                write!(f, "beta{} alpha={alpha} eps={eps}", fold.entries())
            }
            XiIntensity::Kingman => write!(f, "kingman"),
            XiIntensity::Empirical { pedigree, c_n, c_pair, eps } => {
                write!(f, "empirical {} N={} c_n={c_n} c_pair={c_pair} eps={eps:?}", pedigree.model().name(), pedigree.n())
            }
        }
    }
}

fn check_psi(psi: f64, gamma: f64) -> Result<()> {
    if !(psi > 0.0 && psi <= 1.0) {
        return param(format!("psi must lie in (0, 1], got {psi}"));
    }
    if !(gamma > 0.0) {
        return param(format!("gamma must be positive, got {gamma}"));
    }
    Ok(())
}

/// Truncation at which the discarded Beta mass equals `share`.
pub fn default_beta_eps(alpha: f64, share: f64) -> f64 {
    inv_beta_reg(2.0 - alpha, alpha, share)
}

/// `int_eps^1 Beta(2-a, a)(dz) / <x(z), x(z)>`.
pub fn beta_atom_rate(alpha: f64, eps: f64, fold: BetaFold) -> f64 {
    // z = e^s: integrand z^-alpha (1 - z)^(alpha - 1) ds
    let f = |s: f64| {
        let z = s.exp();
        z.powf(-alpha) * (1.0 - z).max(0.0).powf(alpha - 1.0)
    };
    let integral = adaptive_simpson(&f, eps.ln(), 0.0, 1e-11);
    integral / (beta(2.0 - alpha, alpha) * fold.norm_factor())
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    // `tol` is relative to a coarse estimate of the integral
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let scale = (0..=64).map(|k| f(a + (b - a) * k as f64 / 64.0)).sum::<f64>() * (b - a) / 65.0;
    rec(f, a, b, fa, fm, fb, whole, tol * scale.abs().max(f64::MIN_POSITIVE), 40)
}

fn beta_paintbox(z: f64, fold: BetaFold) -> Paintbox {
    Paintbox::uniform(fold.entries(), z / 4.0).expect("z in (0, 1]")
}

/// Atoms in time order, consumed one at a time.
pub trait AtomSource {
    /// Time of the next atom without consuming it.
    fn peek_time(&mut self) -> Option<f64>;
    /// Consume the next atom.
    fn next_atom(&mut self) -> Option<(f64, &Paintbox)>;
}

/// Walks the atoms of a path.
pub struct PathSource<'a> {
    path: &'a PsiPath,
    i: usize,
}

impl<'a> PathSource<'a> {
    pub fn new(path: &'a PsiPath) -> Self {
        PathSource { path, i: 0 }
    }
}

impl AtomSource for PathSource<'_> {
    fn peek_time(&mut self) -> Option<f64> {
        self.path.atoms.get(self.i).map(|a| a.t)
    }

    fn next_atom(&mut self) -> Option<(f64, &Paintbox)> {
        let a = self.path.atoms.get(self.i)?;
        self.i += 1;
        Some((a.t, &a.x))
    }
}

#[derive(Clone, Debug)]
enum AtomShape {
    Fixed(Paintbox),
    Beta { alpha: f64, eps: f64, fold: BetaFold },
}

/// Unbounded Poisson stream of catalog atoms with its own random stream.
pub struct PoissonSource {
    rate: f64,
    shape: AtomShape,
    rng: Stream,
    t: f64,
    pending: Option<(f64, Paintbox)>,
    current: Paintbox,
}

impl PoissonSource {
    fn fill(&mut self) {
        if self.pending.is_some() || self.rate <= 0.0 {
            return;
        }
        let gap: f64 = Exp1.sample(&mut self.rng);
        self.t += gap / self.rate;
        let x = match self.shape {
            AtomShape::Fixed(ref x) => x.clone(),
            AtomShape::Beta { alpha, eps, fold } => {
                // propose from z^(-1-alpha) on [eps, 1], accept with (1 - z)^(alpha - 1)
                let lo = eps.powf(-alpha);
                let z = loop {
                    let u: f64 = self.rng.random();
                    let z = (lo - u * (lo - 1.0)).powf(-1.0 / alpha);
                    if self.rng.random::<f64>() < (1.0 - z).powf(alpha - 1.0) {
                        break z.clamp(eps, 1.0);
                    }
                };
                beta_paintbox(z, fold)
            }
        };
        self.pending = Some((self.t, x));
    }
}

impl AtomSource for PoissonSource {
    fn peek_time(&mut self) -> Option<f64> {
        self.fill();
        self.pending.as_ref().map(|p| p.0)
    }

    fn next_atom(&mut self) -> Option<(f64, &Paintbox)> {
        self.fill();
        let (t, x) = self.pending.take()?;
        self.current = x;
        Some((t, &self.current))
    }
}

/// Sample Ψ on `[0, horizon]`.
pub fn sample_psi(intensity: &XiIntensity, horizon: f64, rng: Stream) -> Result<PsiPath> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return param(format!("horizon must be positive and finite, got {horizon}"));
    }
    if let XiIntensity::Empirical { pedigree, c_n, eps, .. } = intensity {
        return empirical_path(pedigree, *c_n, (horizon / c_n).floor() as u64, *eps);
    }
    let mut src = intensity.source(rng)?;
    let mut atoms = Vec::new();
    while src.peek_time().is_some_and(|t| t <= horizon) {
        let (t, x) = src.next_atom().expect("peeked");
        atoms.push(Atom { t, x: x.clone(), generation: None });
    }
    PsiPath::new(atoms, horizon, intensity.to_string())
}

/// When to stop and what to record.
#[derive(Clone, Debug, Default)]
pub struct RunSpec {
    /// Stop here even without a single ancestor (`None`: the source's end).
    pub horizon: Option<f64>,
    /// Times at which to record the state (right-continuous).
    pub sample_times: Vec<f64>,
}

/// A run of a coalescent: its jumps and the recorded states.
#[derive(Clone, Debug, PartialEq)]
pub struct CoalescentRun {
    pub initial: Partition,
    pub jumps: Vec<(f64, Partition)>,
    pub samples: Vec<(f64, Partition)>,
    /// Pair merger rate used.
    pub c: f64,
    /// Time the run stopped.
    pub end_time: f64,
    /// Stopped before reaching a single block.
    pub censored: bool,
}

impl CoalescentRun {
    pub fn n(&self) -> usize {
        self.initial.n()
    }

    pub fn final_state(&self) -> &Partition {
        self.jumps.last().map_or(&self.initial, |j| &j.1)
    }

    pub fn mrca_time(&self) -> Option<f64> {
        if self.initial.len() <= 1 {
            return Some(0.0);
        }
        self.jumps.last().filter(|j| j.1.len() == 1).map(|j| j.0)
    }

    /// First time labels `i` and `j` share a block.
    pub fn pair_time(&self, i: usize, j: usize) -> Option<f64> {
        if self.initial.block_of(i) == self.initial.block_of(j) {
            return Some(0.0);
        }
        self.jumps.iter().find(|(_, p)| p.block_of(i) == p.block_of(j)).map(|j| j.0)
    }

    /// State at time `t`.
    pub fn state_at(&self, t: f64) -> &Partition {
        self.jumps.iter().take_while(|j| j.0 <= t).last().map_or(&self.initial, |j| &j.1)
    }

    /// `t <partition>` per line, starting with the initial state at time 0.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "0 {}", self.initial)?;
        for (t, p) in &self.jumps {
            writeln!(w, "{t} {p}")?;
        }
        Ok(())
    }
}

struct Recorder {
    run: CoalescentRun,
    pending: Vec<f64>,
    next_sample: usize,
}

impl Recorder {
    fn new(xi0: &Partition, c: f64, spec: &RunSpec) -> Self {
        let mut pending = spec.sample_times.clone();
        pending.sort_by(f64::total_cmp);
        Recorder {
            run: CoalescentRun {
                initial: xi0.clone(),
                jumps: Vec::new(),
                samples: Vec::with_capacity(pending.len()),
                c,
                end_time: 0.0,
                censored: false,
            },
            pending,
            next_sample: 0,
        }
    }

    fn state(&self) -> &Partition {
        self.run.final_state()
    }

    /// Record samples strictly before `t`.
    fn advance_to(&mut self, t: f64) {
        while self.next_sample < self.pending.len() && self.pending[self.next_sample] < t {
            let s = self.pending[self.next_sample];
            let p = self.state().clone();
            self.run.samples.push((s, p));
            self.next_sample += 1;
        }
    }

    fn jump(&mut self, t: f64, p: Partition) {
        self.advance_to(t);
        self.run.jumps.push((t, p));
    }

    fn finish(mut self, t: f64, horizon_hit: bool) -> CoalescentRun {
        if horizon_hit {
            // samples at or before the horizon only
            while self.next_sample < self.pending.len() && self.pending[self.next_sample] <= t {
                let s = self.pending[self.next_sample];
                let p = self.state().clone();
                self.run.samples.push((s, p));
                self.next_sample += 1;
            }
        } else {
            self.advance_to(f64::INFINITY);
        }
        self.run.end_time = t;
        self.run.censored = horizon_hit && self.state().len() > 1;
        self.run
    }
}

fn exp_time<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    if rate > 0.0 {
        let e: f64 = Exp1.sample(rng);
        e / rate
    } else {
        f64::INFINITY
    }
}

fn uniform_pair<R: Rng + ?Sized>(rng: &mut R, b: usize) -> (usize, usize) {
    let i = rng.random_range(0..b);
    let mut j = rng.random_range(0..b - 1);
    if j >= i {
        j += 1;
    }
    (i.min(j), i.max(j))
}

fn horizon_of(spec: &RunSpec, source_end: Option<f64>) -> f64 {
    match (spec.horizon, source_end) {
        (Some(h), Some(e)) => h.min(e),
        (Some(h), None) => h,
        (None, Some(e)) => e,
        (None, None) => f64::INFINITY,
    }
}

/// Coagulator flow. Pair atoms live on all pairs of `[n]` at rate `c` each and
/// act on blocks `i < j` when both indices are below the current block count.
/// An atom of the source wins a tie with a pair atom.
///
/// `source_end` is the time up to which the source is known (a path's horizon).
pub fn run_flow<S: AtomSource, R: Rng + ?Sized>(
    source: &mut S,
    source_end: Option<f64>,
    c: f64,
    xi0: &Partition,
    spec: &RunSpec,
    rng: &mut R,
) -> CoalescentRun {
    let n = xi0.n();
    let horizon = horizon_of(spec, source_end);
    let mut rec = Recorder::new(xi0, c, spec);
    let k_rate = c * (n * n.saturating_sub(1) / 2) as f64;
    let mut labels = Vec::new();
    let mut t = 0.0;
    loop {
        if rec.state().len() <= 1 {
            return rec.finish(t, false);
        }
        let ta = source.peek_time().filter(|&ta| ta <= horizon).unwrap_or(f64::INFINITY);
        let tk = t + exp_time(rng, k_rate);
        if tk < ta {
            if tk > horizon {
                return rec.finish(horizon, true);
            }
            t = tk;
            let (i, j) = uniform_pair(rng, n);
            let b = rec.state().len();
            if j < b {
                let p = rec.state().merge_pair(i, j);
                rec.jump(t, p);
            }
        } else {
            if !ta.is_finite() {
                return rec.finish(horizon, true);
            }
            let (ta, x) = source.next_atom().expect("peeked");
            t = ta;
            let b = rec.state().len();
            x.assign(b, rng, &mut labels);
            if has_collision(&labels) {
                let alpha = Partition::from_labels(&labels);
                let p = rec.state().coagulate(&alpha);
                rec.jump(t, p);
            }
        }
    }
}

/// Merger target of a paintbox given that something merges.
fn conditional_merger<R: Rng + ?Sized>(x: &Paintbox, b: usize, rng: &mut R, labels: &mut Vec<usize>) -> Partition {
    let p_merge = 1.0 - x.no_merge_prob(b);
    if b <= 6 && p_merge < 0.05 {
        let start = Partition::singletons(b);
        let targets: Vec<(Partition, f64)> = start
            .coarsenings()
            .into_iter()
            .filter(|e| e.len() < b)
            .map(|e| {
                let p = x.prob(&start, &e);
                (e, p)
            })
            .collect();
        let total: f64 = targets.iter().map(|t| t.1).sum();
        let mut u = rng.random::<f64>() * total;
        for (e, p) in &targets {
            if u < *p {
                return e.clone();
            }
            u -= p;
        }
        return targets.last().expect("some merger has positive mass").0.clone();
    }
    loop {
        x.assign(b, rng, labels);
        if has_collision(labels) {
            return Partition::from_labels(labels);
        }
    }
}

/// Jump-hold sampler: from `b` blocks the pair clock rings at rate `c * C(b, 2)`;
/// each atom before it fires with probability `1 - p(x; b singletons stay apart)`.
pub fn run_jump_hold<S: AtomSource, R: Rng + ?Sized>(
    source: &mut S,
    source_end: Option<f64>,
    c: f64,
    xi0: &Partition,
    spec: &RunSpec,
    rng: &mut R,
) -> CoalescentRun {
    let horizon = horizon_of(spec, source_end);
    let mut rec = Recorder::new(xi0, c, spec);
    let mut labels = Vec::new();
    let mut t = 0.0;
    'outer: loop {
        let b = rec.state().len();
        if b <= 1 {
            return rec.finish(t, false);
        }
        let tk = t + exp_time(rng, c * (b * (b - 1) / 2) as f64);
        while let Some(ta) = source.peek_time().filter(|&ta| ta <= horizon && ta <= tk) {
            let (_, x) = source.next_atom().expect("peeked");
            if rng.random::<f64>() >= x.no_merge_prob(b) {
                let alpha = conditional_merger(x, b, rng, &mut labels);
                let p = rec.state().coagulate(&alpha);
                t = ta;
                rec.jump(t, p);
                continue 'outer;
            }
        }
        if tk > horizon {
            return rec.finish(horizon, true);
        }
        t = tk;
        let (i, j) = uniform_pair(rng, b);
        let p = rec.state().merge_pair(i, j);
        rec.jump(t, p);
    }
}

/// Jump-hold sampler driven by a catalog intensity. Atoms that cannot merge any
/// of the current blocks are thinned out analytically, so truncated Beta
/// intensities cost `O(1)` per jump whatever the truncation.
pub fn run_intensity<R: Rng + ?Sized>(intensity: &XiIntensity, xi0: &Partition, spec: &RunSpec, rng: &mut R) -> Result<CoalescentRun> {
    let c = intensity.c_pair();
    let horizon = spec.horizon.unwrap_or(f64::INFINITY);
    let mut rec = Recorder::new(xi0, c, spec);
    let mut labels = Vec::new();
    let mut t = 0.0;
    match intensity {
        XiIntensity::Empirical { .. } => param("empirical intensities run on a path"),
        XiIntensity::Kingman | XiIntensity::PointMass { .. } => {
            let (rate, x) = match intensity {
                XiIntensity::PointMass { rate, x, .. } => (*rate, x.clone()),
                _ => (0.0, Paintbox::empty()),
            };
            loop {
                let b = rec.state().len();
                if b <= 1 {
                    return Ok(rec.finish(t, false));
                }
                let pair_rate = c * (b * (b - 1) / 2) as f64;
                let atom_rate = if rate > 0.0 { rate * (1.0 - x.no_merge_prob(b)) } else { 0.0 };
                let dt = exp_time(rng, pair_rate + atom_rate);
                if t + dt > horizon {
                    return Ok(rec.finish(horizon, true));
                }
                t += dt;
                let alpha = if rng.random::<f64>() * (pair_rate + atom_rate) < atom_rate {
                    conditional_merger(&x, b, rng, &mut labels)
                } else {
                    let (i, j) = uniform_pair(rng, b);
                    Partition::singletons(b).merge_pair(i, j)
                };
                let p = rec.state().coagulate(&alpha);
                rec.jump(t, p);
            }
        }
        &XiIntensity::TruncatedBeta { alpha, eps, fold } => {
            // dominating clock: every pair at rate Xi(z >= eps) + compensation = 1
            let beta_law = Beta::new(2.0 - alpha, alpha).map_err(|e| Error::Parameter(e.to_string()))?;
            loop {
                let b = rec.state().len();
                if b <= 1 {
                    return Ok(rec.finish(t, false));
                }
                let pairs = (b * (b - 1) / 2) as f64;
                let dt = exp_time(rng, pairs);
                if t + dt > horizon {
                    return Ok(rec.finish(horizon, true));
                }
                t += dt;
                if rng.random::<f64>() < c {
                    let (i, j) = uniform_pair(rng, b);
                    let p = rec.state().merge_pair(i, j);
                    rec.jump(t, p);
                    continue;
                }
                let z = loop {
                    let z: f64 = beta_law.sample(rng);
                    if z >= eps {
                        break z;
                    }
                };
                let x = beta_paintbox(z, fold);
                let accept = (1.0 - x.no_merge_prob(b)) / (pairs * x.l2sq());
                if rng.random::<f64>() < accept {
                    let a = conditional_merger(&x, b, rng, &mut labels);
                    let p = rec.state().coagulate(&a);
                    rec.jump(t, p);
                }
            }
        }
    }
}

/// The ε-naive chain on the generation grid. `atoms` must be an ε-cut empirical
/// path (atoms carry generations). In an atom generation the blocks undergo that
/// paintbox merger; otherwise exactly one uniform pair merges with probability
/// `C(b, 2) c_N c_pair`. Jump times are `generation * c_N`.
pub fn run_naive<R: Rng + ?Sized>(
    atoms: &PsiPath,
    c_n: f64,
    c_pair: f64,
    xi0: &Partition,
    max_generations: u64,
    spec: &RunSpec,
    rng: &mut R,
) -> Result<CoalescentRun> {
    if !(c_n > 0.0 && c_pair >= 0.0) {
        return param(format!("need c_N > 0 and c_pair >= 0, got {c_n}, {c_pair}"));
    }
    let gens: Vec<u64> = atoms
        .atoms()
        .iter()
        .map(|a| a.generation.ok_or_else(|| Error::Input("naive chain needs atoms with generations".into())))
        .collect::<Result<_>>()?;
    let horizon_gen = match spec.horizon {
        Some(h) => max_generations.min((h / c_n).floor() as u64),
        None => max_generations,
    };
    let mut rec = Recorder::new(xi0, c_pair, spec);
    let mut labels = Vec::new();
    let mut g = 0u64;
    let mut next = gens.partition_point(|&a| a <= g);
    loop {
        let b = rec.state().len();
        if b <= 1 {
            return Ok(rec.finish(g as f64 * c_n, false));
        }
        let q = ((b * (b - 1) / 2) as f64 * c_n * c_pair).min(1.0);
        let g_pair = if q <= 0.0 {
            u64::MAX
        } else if q >= 1.0 {
            g + 1
        } else {
            let u = 1.0 - rng.random::<f64>();
            g.saturating_add((u.ln() / (-q).ln_1p()).ceil().max(1.0) as u64)
        };
        let g_atom = gens.get(next).copied().unwrap_or(u64::MAX);
        let g_event = g_pair.min(g_atom);
        if g_event > horizon_gen {
            return Ok(rec.finish(horizon_gen as f64 * c_n, true));
        }
        g = g_event;
        if g_atom <= g_pair {
            let x = &atoms.atoms()[next].x;
            next += 1;
            x.assign(b, rng, &mut labels);
            if has_collision(&labels) {
                let p = rec.state().coagulate(&Partition::from_labels(&labels));
                rec.jump(g as f64 * c_n, p);
            }
        } else {
            let (i, j) = uniform_pair(rng, b);
            let p = rec.state().merge_pair(i, j);
            rec.jump(g as f64 * c_n, p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::stats::MeanVar;

    fn rng(i: u64) -> Stream {
        stream(77, Purpose::Coalescent, i, 0)
    }

    #[test]
    fn catalog_rates() {
        let i = XiIntensity::large_family_couple(0.5, 0.5).unwrap();
        assert!((i.atom_rate().unwrap() - 16.0).abs() < 1e-12);
        assert_eq!(i.c_pair(), 0.0);
        let ii = XiIntensity::large_family_couple(1.0, 1.0).unwrap();
        assert!((ii.atom_rate().unwrap() - 4.0 / 3.0).abs() < 1e-12);
        assert!((ii.c_pair() - 2.0 / 3.0).abs() < 1e-12);
        assert!((ii.atom_pair_rate().unwrap() + ii.c_pair() - 1.0).abs() < 1e-12);
        let k = XiIntensity::large_family_couple(1.0, 1.5).unwrap();
        assert!(matches!(k, XiIntensity::Kingman));
        assert_eq!(k.c_pair(), 1.0);
        assert_eq!(k.atom_rate(), Some(0.0));
        for psi in [0.2, 0.7, 1.0] {
            let ind = XiIntensity::large_family_individual(psi, 1.0).unwrap();
            assert!((ind.atom_pair_rate().unwrap() + ind.c_pair() - 1.0).abs() < 1e-12);
            let star = XiIntensity::two_sex_star(0.5, 2.0, psi).unwrap();
            assert!((star.atom_pair_rate().unwrap() - psi * psi / (psi * psi + 2.0)).abs() < 1e-12);
        }
        assert!(XiIntensity::large_family_couple(1.5, 1.0).is_err());
    }

    #[test]
    fn beta_rates_are_consistent() {
        for fold in [BetaFold::Two, BetaFold::Four] {
            let (alpha, eps) = (1.5, 0.05);
            let i = XiIntensity::truncated_beta(alpha, Some(eps), fold).unwrap();
            // pair mass of the atoms = rate * E[<x,x>] = Xi(z >= eps)
            let src = i.source(rng(0)).unwrap();
            let mut src = src;
            let mut mv = MeanVar::default();
            for _ in 0..200_000 {
                let (_, x) = src.next_atom().unwrap();
                mv.push(x.l2sq());
            }
            let pair = i.atom_rate().unwrap() * mv.mean();
            let want = i.atom_pair_rate().unwrap();
            assert!((pair - want).abs() < 4.0 * i.atom_rate().unwrap() * mv.se(), "{pair} vs {want}");
            assert!((want + i.c_pair() - 1.0).abs() < 1e-12);
        }
        let d = XiIntensity::truncated_beta(1.5, None, BetaFold::Two).unwrap();
        assert!((d.c_pair() - 0.01).abs() < 1e-9);
        assert!(XiIntensity::truncated_beta(2.5, None, BetaFold::Two).is_err());
    }

    #[test]
    fn bolthausen_sznitman_rate_closed_form() {
        // alpha = 1: int_eps^1 z^-2 dz = 1/eps - 1, Beta(1,1) = 1
        let r = beta_atom_rate(1.0, 0.1, BetaFold::Two);
        assert!((r - 8.0 * 9.0).abs() < 1e-6, "{r}");
    }

    fn one_atom_path(t: f64, x: Paintbox, horizon: f64) -> PsiPath {
        PsiPath::new(vec![Atom { t, x, generation: None }], horizon, "test").unwrap()
    }

    #[test]
    fn full_bucket_merges_everything_at_its_time() {
        let path = one_atom_path(0.7, Paintbox::new([1.0]).unwrap(), 2.0);
        let spec = RunSpec { horizon: None, sample_times: vec![0.5, 0.7, 1.0] };
        for run in [
            run_flow(&mut PathSource::new(&path), Some(2.0), 0.0, &Partition::singletons(3), &spec, &mut rng(1)),
            run_jump_hold(&mut PathSource::new(&path), Some(2.0), 0.0, &Partition::singletons(3), &spec, &mut rng(1)),
        ] {
            assert_eq!(run.jumps, vec![(0.7, Partition::one_block(3))]);
            assert_eq!(run.samples[0].1, Partition::singletons(3));
            assert_eq!(run.samples[1].1, Partition::one_block(3));
            assert_eq!(run.samples[2].1, Partition::one_block(3));
            assert_eq!(run.mrca_time(), Some(0.7));
        }
    }

    #[test]
    fn kingman_pair_and_triple() {
        let spec = RunSpec::default();
        let mut pair = MeanVar::default();
        let mut triple = MeanVar::default();
        let mut r = rng(2);
        for _ in 0..100_000 {
            let mut src = XiIntensity::Kingman.source(rng(3)).unwrap();
            pair.push(run_flow(&mut src, None, 1.0, &Partition::singletons(2), &spec, &mut r).mrca_time().unwrap());
            let mut src = XiIntensity::Kingman.source(rng(3)).unwrap();
            triple.push(run_jump_hold(&mut src, None, 1.0, &Partition::singletons(3), &spec, &mut r).mrca_time().unwrap());
        }
        assert!((pair.mean() - 1.0).abs() < 3.0 * pair.se());
        assert!((triple.mean() - 4.0 / 3.0).abs() < 3.0 * triple.se());
    }

    #[test]
    fn single_far_atom_fires_with_pair_mass() {
        let x = Paintbox::new([0.3, 0.2]).unwrap();
        let path = one_atom_path(5.0, x.clone(), 10.0);
        let reps = 100_000;
        let mut hits = 0;
        let mut r = rng(4);
        for _ in 0..reps {
            let run = run_jump_hold(&mut PathSource::new(&path), Some(10.0), 0.0, &Partition::singletons(2), &RunSpec::default(), &mut r);
            match run.mrca_time() {
                Some(t) => {
                    assert_eq!(t, 5.0);
                    hits += 1;
                }
                None => assert!(run.censored),
            }
        }
        let p = x.l2sq();
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        assert!((hits as f64 / reps as f64 - p).abs() < 3.0 * se);
    }

    #[test]
    fn one_block_never_jumps() {
        let path = one_atom_path(1.0, Paintbox::new([1.0]).unwrap(), 2.0);
        let run = run_jump_hold(&mut PathSource::new(&path), Some(2.0), 1.0, &Partition::singletons(1), &RunSpec::default(), &mut rng(5));
        assert!(run.jumps.is_empty());
        assert_eq!(run.mrca_time(), Some(0.0));
    }

    #[test]
    fn pair_merge_bookkeeping() {
        // P(pair merged by T) = 1 - exp(-cT) prod (1 - <x,x>)
        let xs = [Paintbox::new([0.5, 0.25]).unwrap(), Paintbox::new([0.1; 4]).unwrap(), Paintbox::new([0.6]).unwrap()];
        let atoms = xs.iter().enumerate().map(|(k, x)| Atom { t: 0.3 * (k + 1) as f64, x: x.clone(), generation: None }).collect();
        let path = PsiPath::new(atoms, 1.0, "three").unwrap();
        let c = 0.8;
        let want = 1.0 - (-c * 1.0f64).exp() * xs.iter().map(|x| 1.0 - x.l2sq()).product::<f64>();
        let reps = 100_000;
        let mut r = rng(6);
        for flow in [true, false] {
            let mut hits = 0;
            for _ in 0..reps {
                let mut src = PathSource::new(&path);
                let run = if flow {
                    run_flow(&mut src, Some(1.0), c, &Partition::singletons(2), &RunSpec::default(), &mut r)
                } else {
                    run_jump_hold(&mut src, Some(1.0), c, &Partition::singletons(2), &RunSpec::default(), &mut r)
                };
                hits += run.mrca_time().is_some() as u32;
            }
            let f = hits as f64 / reps as f64;
            assert!((f - want).abs() < 3.0 * (want * (1.0 - want) / reps as f64).sqrt(), "{f} vs {want}");
        }
    }

    #[test]
    fn epsilon_cut_semantics() {
        let atoms = [0.1, 0.5, 0.9]
            .iter()
            .enumerate()
            .map(|(k, &w)| Atom { t: k as f64, x: Paintbox::new([w]).unwrap(), generation: None })
            .collect();
        let path = PsiPath::new(atoms, 3.0, "mixed").unwrap();
        assert_eq!(path.epsilon_cut(1e-9).unwrap().atoms(), path.atoms());
        assert!(path.epsilon_cut(0.95).unwrap().is_empty());
        let mid = path.epsilon_cut(0.3).unwrap();
        assert_eq!(mid.len(), 2);
        assert_eq!(mid.epsilon_cut(0.3).unwrap().atoms(), mid.atoms());
        assert!(path.epsilon_cut(0.0).is_err());
    }

    #[test]
    fn path_text_round_trip() {
        let i = XiIntensity::truncated_beta(1.5, Some(0.2), BetaFold::Four).unwrap();
        let path = sample_psi(&i, 3.0, rng(7)).unwrap();
        assert!(!path.is_empty());
        let mut buf = Vec::new();
        path.write_text(&mut buf).unwrap();
        let back = PsiPath::read_text(&buf[..]).unwrap();
        assert_eq!(back, path);
        let ped = Pedigree::new(CanningsModel::WrightFisher { n: 10 }, 1).unwrap();
        let emp = empirical_path(&ped, 0.05, 20, None).unwrap();
        assert_eq!(emp.len(), 20);
        let mut buf = Vec::new();
        emp.write_text(&mut buf).unwrap();
        assert_eq!(PsiPath::read_text(&buf[..]).unwrap(), emp);
        assert!(PsiPath::read_text(&b"0.5 0.7 0.6\n"[..]).is_err());
    }

    #[test]
    fn path_validation() {
        let x = Paintbox::new([0.5]).unwrap();
        let a = |t| Atom { t, x: x.clone(), generation: None };
        assert!(PsiPath::new(vec![a(1.0), a(1.0)], 2.0, "tie").is_err());
        assert!(PsiPath::new(vec![a(3.0)], 2.0, "late").is_err());
        assert!(PsiPath::new(vec![], 0.0, "flat").is_err());
    }

    #[test]
    fn naive_without_atoms_is_geometric() {
        let path = PsiPath::empty(1.0).unwrap();
        let (c_n, c_pair) = (0.01, 0.5);
        let mut mv = MeanVar::default();
        let mut r = rng(8);
        for _ in 0..50_000 {
            let run = run_naive(&path, c_n, c_pair, &Partition::singletons(2), u64::MAX, &RunSpec::default(), &mut r).unwrap();
            mv.push(run.mrca_time().unwrap() / c_n);
        }
        assert!((mv.mean() - 1.0 / (c_n * c_pair)).abs() < 3.0 * mv.se());
    }

    #[test]
    fn naive_atoms_take_the_generation() {
        let atoms = vec![Atom { t: 0.3, x: Paintbox::new([1.0]).unwrap(), generation: Some(3) }];
        let path = PsiPath::new(atoms, 1.0, "full").unwrap();
        let run = run_naive(&path, 0.1, 0.0, &Partition::singletons(4), 10, &RunSpec::default(), &mut rng(9)).unwrap();
        assert_eq!(run.jumps.len(), 1);
        assert!((run.mrca_time().unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn intensity_sampler_matches_flow_for_point_mass() {
        let i = XiIntensity::large_family_couple(1.0, 1.0).unwrap();
        let reps = 50_000;
        let (mut a, mut b) = (MeanVar::default(), MeanVar::default());
        let mut r = rng(10);
        for k in 0..reps {
            let mut src = i.source(stream(1, Purpose::Psi, k, 0)).unwrap();
            a.push(run_flow(&mut src, None, i.c_pair(), &Partition::singletons(4), &RunSpec::default(), &mut r).mrca_time().unwrap());
            b.push(run_intensity(&i, &Partition::singletons(4), &RunSpec::default(), &mut r).unwrap().mrca_time().unwrap());
        }
        let se = (a.se().powi(2) + b.se().powi(2)).sqrt();
        assert!((a.mean() - b.mean()).abs() < 4.0 * se, "{} vs {}", a.mean(), b.mean());
    }
}
