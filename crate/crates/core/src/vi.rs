//! Variational-inequality view of the games and the two-phase equilibrium
//! heuristic.
//!
//! A profile `P` is a Nash equilibrium iff `P = T(P) = Π(P − τ F(P))`, where
//! `Π` projects every user's block onto its feasible set. The heuristic runs
//! Picard iterations on `T` (phase 1), then cyclic steepest descent on
//! `g(P)² = ‖P − T(P)‖²` (phase 2), and restarts phase 1 from the phase-2
//! iterate when descent stalls.
//!
//! # The map `F`
//!
//! Two fields are provided (see [`FieldKind`]). Writing `c_i(s) =
//! (∂r_i/∂P_i(s)) / m_i(s)` for the conditional marginal rate of user `i` in
//! info-state `s`:
//!
//! - [`FieldKind::Reciprocal`]: `F_i(s) = 1 / c_i(s)`. With full information
//!   this is `P_i(h) + (1 + Σ_j |h_ij|² P_j(h)) / (α_i |h_ii|²)`, i.e.
//!   `F = (I + Ĥ) P + ĥ` state by state. It is measured in watts, so the
//!   residual is comparable across SNRs.
//! - [`FieldKind::Gradient`]: `F_i(s) = −c_i(s) / n_i` (`n_i` info-states),
//!   which is `−∇_i r_i` for equiprobable info-states. With the Euclidean
//!   projection ([`ProjectionMode::InequalityKkt`]) it is the plain `−∇_i r_i`.
//!
//! The budget-binding projection `max(0, x − λ)` is the projection in the
//! metric weighted by `m`, which is why `c_i` rather than `∂r_i` appears.
//! Both fields have the Nash equilibria as fixed points: on the states in
//! use `c_i` is constant and elsewhere it is no larger. The reciprocal field
//! is positive and pairs only with the budget-binding projection.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::channel::{ChannelModel, Variant};
use crate::error::{Error, Result};
use crate::game::Game;
use crate::math;
use crate::policy::{self, PolicyProfile, PowerPolicy, ProjectionMode};
use crate::rates::{LogBase, RateReport};

/// Which field defines the `T` map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FieldKind {
    #[default]
    Reciprocal,
    Gradient,
}

impl FieldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Reciprocal => "reciprocal",
            FieldKind::Gradient => "gradient",
        }
    }
}

impl core::str::FromStr for FieldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "reciprocal" => Ok(FieldKind::Reciprocal),
            "gradient" => Ok(FieldKind::Gradient),
            other => Err(Error::InvalidParam(alloc::format!(
                "unknown field `{other}`"
            ))),
        }
    }
}

/// Parameters of the two-phase heuristic.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveParams {
    /// Step scale of the `T` map.
    pub tau: f64,
    pub mode: ProjectionMode,
    pub field: FieldKind,
    /// Picard iterations per phase-1 run.
    pub max_picard: usize,
    /// Residual target `g(P) < eps`.
    pub eps: f64,
    /// A descent sweep moving the profile less than `delta` is a stall.
    pub delta: f64,
    /// First descent step `γ_1`.
    pub gamma0: f64,
    /// `γ ← γ / (1 + γ)` after this many descent iterations.
    pub gamma_every: usize,
    /// Central-difference step relative to `max(1, |P|)`.
    pub fd_rel_step: f64,
    /// Maximum number of returns to phase 1.
    pub max_restarts: usize,
    /// Descent iterations per phase-2 run before it counts as a stall.
    pub max_descent: usize,
    /// Keep doubling an accepted descent step while `g²` keeps falling.
    pub expand_step: bool,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            tau: 0.1,
            mode: ProjectionMode::EqualityBinding,
            field: FieldKind::Reciprocal,
            max_picard: 100,
            eps: 1e-3,
            delta: 1e-6,
            gamma0: 0.5,
            gamma_every: 10,
            fd_rel_step: 1e-4,
            max_restarts: 10,
            max_descent: 200,
            expand_step: true,
        }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau", self.tau),
            ("eps", self.eps),
            ("delta", self.delta),
            ("gamma0", self.gamma0),
            ("fd_rel_step", self.fd_rel_step),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParam(alloc::format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.gamma_every == 0 {
            return Err(Error::InvalidParam("gamma_every must be positive".into()));
        }
        if self.max_restarts == 0 {
            return Err(Error::InvalidParam(
                "max_restarts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of an equilibrium computation.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub profile: PolicyProfile,
    /// `‖P − T(P)‖` of `profile`.
    pub residual: f64,
    pub picard_iterations: usize,
    pub descent_iterations: usize,
    pub restarts: usize,
    pub converged: bool,
    pub rates: RateReport,
    /// Filled in by callers that can measure time.
    pub wall_time: Option<core::time::Duration>,
}

/// The VI of one game: field `F`, step `τ` and projection mode.
#[derive(Debug, Clone, Copy)]
pub struct ViProblem<'a> {
    game: &'a Game,
    tau: f64,
    mode: ProjectionMode,
    field: FieldKind,
}

impl<'a> ViProblem<'a> {
    /// Reciprocal field.
    pub fn new(game: &'a Game, tau: f64, mode: ProjectionMode) -> Result<Self> {
        ViProblem::with_field(game, tau, mode, FieldKind::Reciprocal)
    }

    pub fn with_field(
        game: &'a Game,
        tau: f64,
        mode: ProjectionMode,
        field: FieldKind,
    ) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParam(alloc::format!(
                "tau must be positive, got {tau}"
            )));
        }
        if field == FieldKind::Reciprocal && mode == ProjectionMode::InequalityKkt {
            return Err(Error::InvalidParam(
                "the reciprocal field pairs only with the budget-binding projection".into(),
            ));
        }
        Ok(ViProblem {
            game,
            tau,
            mode,
            field,
        })
    }

    pub fn from_params(game: &'a Game, params: &SolveParams) -> Result<Self> {
        ViProblem::with_field(game, params.tau, params.mode, params.field)
    }

    pub fn field_kind(&self) -> FieldKind {
        self.field
    }

    pub fn game(&self) -> &'a Game {
        self.game
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn mode(&self) -> ProjectionMode {
        self.mode
    }

    pub(crate) fn field_flat(&self, flat: &[f64]) -> Vec<f64> {
        let g = self.game;
        let n = g.n_users();
        let mut out = vec![0.0; g.dim()];
        if g.variant() == Variant::Full && self.field == FieldKind::Reciprocal {
            let k_count = g.space().len();
            for (k, st) in g.space().states().iter().enumerate() {
                for i in 0..n {
                    let mut num = 1.0;
                    for j in 0..n {
                        if j != i {
                            num += st.gain(n, i, j) * flat[j * k_count + k];
                        }
                    }
                    let den = g.model().alpha(i) * st.gain(n, i, i);
                    out[i * k_count + k] = flat[i * k_count + k] + num / den;
                }
            }
            return out;
        }
        for i in 0..n {
            let grad = g.own_grad_flat(i, flat);
            let m = g.indexer().marginals(i);
            let ns = m.len() as f64;
            let off = g.offset(i);
            for (s, d) in grad.iter().enumerate() {
                out[off + s] = match (self.field, self.mode) {
                    (FieldKind::Reciprocal, _) => m[s] / d,
                    (FieldKind::Gradient, ProjectionMode::EqualityBinding) => -d / (ns * m[s]),
                    (FieldKind::Gradient, ProjectionMode::InequalityKkt) => -d,
                };
            }
        }
        out
    }

    /// Evaluates `F(P)`.
    pub fn field(&self, profile: &PolicyProfile) -> Result<PolicyProfile> {
        let flat = self.game.flatten(profile)?;
        Ok(self.game.unflatten(&self.field_flat(&flat)))
    }

    /// `T(P)` and the per-user projection multipliers.
    pub(crate) fn t_flat(&self, flat: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let f = self.field_flat(flat);
        let mut out = vec![0.0; flat.len()];
        let mut mult = Vec::with_capacity(self.game.n_users());
        for i in 0..self.game.n_users() {
            let r = self.game.user_range(i);
            let x: Vec<f64> = r.clone().map(|k| flat[k] - self.tau * f[k]).collect();
            let p = policy::project(
                &x,
                self.game.indexer().marginals(i),
                self.game.model().budget(i),
                self.mode,
            )?;
            out[r].copy_from_slice(&p.values);
            mult.push(p.multiplier);
        }
        Ok((out, mult))
    }

    pub fn t_map(&self, profile: &PolicyProfile) -> Result<PolicyProfile> {
        let flat = self.game.flatten(profile)?;
        Ok(self.game.unflatten(&self.t_flat(&flat)?.0))
    }

    pub(crate) fn residual_flat(&self, flat: &[f64]) -> Result<f64> {
        let (t, _) = self.t_flat(flat)?;
        Ok(math::dist(flat, &t))
    }

    /// `g(P) = ‖P − T(P)‖`.
    pub fn residual(&self, profile: &PolicyProfile) -> Result<f64> {
        let flat = self.game.flatten(profile)?;
        self.residual_flat(&flat)
    }

    /// `Σ_{i,s} min(P_i(s), τ F_i(s) + λ_i c_i(s))²` where `λ_i` is the
    /// projection multiplier and `c_i(s)` is 1 (budget-binding) or `m_i(s)`
    /// (Euclidean). Equals `g(P)²`.
    pub fn residual_min_sum(&self, profile: &PolicyProfile) -> Result<f64> {
        let flat = self.game.flatten(profile)?;
        let f = self.field_flat(&flat);
        let (_, mult) = self.t_flat(&flat)?;
        let mut acc = 0.0;
        for i in 0..self.game.n_users() {
            let m = self.game.indexer().marginals(i);
            for (s, k) in self.game.user_range(i).enumerate() {
                let c = match self.mode {
                    ProjectionMode::EqualityBinding => 1.0,
                    ProjectionMode::InequalityKkt => m[s],
                };
                let t = flat[k].min(self.tau * f[k] + mult[i] * c);
                acc += t * t;
            }
        }
        Ok(acc)
    }
}

/// Block-diagonal affine form of the full-information field:
/// `F(P)(h) = (I + Ĥ(h)) P(h) + ĥ(h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineForm {
    pub n_users: usize,
    /// Per state, row-major `N × N` matrix `Ĥ(h)` with zero diagonal.
    pub h_hat: Vec<Vec<f64>>,
    /// Per state, `ĥ(h)_i = 1 / (α_i |h_ii|²)`.
    pub h_vec: Vec<Vec<f64>>,
}

impl AffineForm {
    /// Evaluates `F` on a full-information profile.
    pub fn apply(&self, profile: &PolicyProfile) -> PolicyProfile {
        let n = self.n_users;
        let mut values = vec![vec![0.0; self.h_hat.len()]; n];
        for (k, (hh, hv)) in self.h_hat.iter().zip(&self.h_vec).enumerate() {
            for i in 0..n {
                let mut v = profile.get(i, k) + hv[i];
                for j in 0..n {
                    v += hh[i * n + j] * profile.get(j, k);
                }
                values[i][k] = v;
            }
        }
        PolicyProfile::from_values(Variant::Full, values)
    }
}

/// `Ĥ(h)_ij = |h_ij|² / (α_i |h_ii|²)` for `i ≠ j`, `ĥ(h)_i = 1 / (α_i |h_ii|²)`.
pub fn assemble_affine(game: &Game) -> Result<AffineForm> {
    if game.variant() != Variant::Full {
        return Err(Error::VariantMismatch {
            expected: Variant::Full,
            got: game.variant(),
        });
    }
    let n = game.n_users();
    let mut h_hat = Vec::with_capacity(game.space().len());
    let mut h_vec = Vec::with_capacity(game.space().len());
    for st in game.space().states() {
        let mut m = vec![0.0; n * n];
        let mut v = vec![0.0; n];
        for i in 0..n {
            let d = game.model().alpha(i) * st.gain(n, i, i);
            v[i] = 1.0 / d;
            for j in 0..n {
                if j != i {
                    m[i * n + j] = st.gain(n, i, j) / d;
                }
            }
        }
        h_hat.push(m);
        h_vec.push(v);
    }
    Ok(AffineForm {
        n_users: n,
        h_hat,
        h_vec,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definiteness {
    PositiveSemidefinite,
    Indefinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monotonicity {
    /// Smallest eigenvalue of `(H̃ + H̃ᵀ)/2` over all states, `H̃ = I + Ĥ`.
    pub min_eigenvalue: f64,
    pub tag: Definiteness,
}

/// Eigenvalues within this distance below zero still count as semidefinite.
pub const PSD_TOL: f64 = 1e-12;

/// Classifies the full-information field as monotone (positive
/// semidefinite symmetric part of `I + Ĥ` in every state) or not.
pub fn classify_monotonicity(model: &ChannelModel) -> Result<Monotonicity> {
    let game = Game::new(model.clone(), Variant::Full)?;
    let aff = assemble_affine(&game)?;
    let n = aff.n_users;
    let mut min_eig = f64::INFINITY;
    for hh in &aff.h_hat {
        let sym = DMatrix::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id + 0.5 * (hh[i * n + j] + hh[j * n + i])
        });
        let e = sym.symmetric_eigenvalues();
        min_eig = min_eig.min(e.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    let tag = if min_eig >= -PSD_TOL {
        Definiteness::PositiveSemidefinite
    } else {
        Definiteness::Indefinite
    };
    Ok(Monotonicity {
        min_eigenvalue: min_eig,
        tag,
    })
}

/// Runs `max` Picard iterations `P ← T(P)`.
pub fn phase1(problem: &ViProblem<'_>, start: &PolicyProfile, max: usize) -> Result<PolicyProfile> {
    let mut flat = problem.game.flatten(start)?;
    for _ in 0..max {
        flat = problem.t_flat(&flat)?.0;
    }
    Ok(problem.game.unflatten(&flat))
}

/// Cached pieces of `g²` for the full-information game with the
/// budget-binding projection. A single-entry perturbation of `P` only moves
/// one state's `y = P − τF` entries and, through the water levels, the
/// residual of active states; this makes finite differences `O(N)` each.
struct FullResidualCache {
    n: usize,
    k: usize,
    tau: f64,
    /// `|h_ji|² / (α_j |h_jj|²)` at `[k][j * n + i]`.
    coupling: Vec<f64>,
    marg: Vec<f64>,
    budgets: Vec<f64>,
    p: Vec<f64>,
    y: Vec<f64>,
    lambda: Vec<f64>,
    r: Vec<f64>,
    /// Per user: active weight, active residual sum, active count, `Σ r²`.
    w: Vec<f64>,
    s: Vec<f64>,
    cnt: Vec<f64>,
    f_user: Vec<f64>,
    /// Per user: two smallest `|y − λ|` with their states.
    gaps: Vec<[(f64, usize); 2]>,
    f: f64,
}

impl FullResidualCache {
    fn new(problem: &ViProblem<'_>, flat: &[f64]) -> Result<Self> {
        let g = problem.game;
        let n = g.n_users();
        let k = g.space().len();
        let mut coupling = vec![0.0; k * n * n];
        for (kk, st) in g.space().states().iter().enumerate() {
            for j in 0..n {
                let d = g.model().alpha(j) * st.gain(n, j, j);
                for i in 0..n {
                    if i != j {
                        coupling[kk * n * n + j * n + i] = st.gain(n, j, i) / d;
                    }
                }
            }
        }
        let mut c = FullResidualCache {
            n,
            k,
            tau: problem.tau,
            coupling,
            marg: g.indexer().marginals(0).to_vec(),
            budgets: g.model().budgets().to_vec(),
            p: flat.to_vec(),
            y: vec![0.0; flat.len()],
            lambda: vec![0.0; n],
            r: vec![0.0; flat.len()],
            w: vec![0.0; n],
            s: vec![0.0; n],
            cnt: vec![0.0; n],
            f_user: vec![0.0; n],
            gaps: vec![[(f64::INFINITY, usize::MAX); 2]; n],
            f: 0.0,
        };
        let field = problem.field_flat(flat);
        for idx in 0..flat.len() {
            c.y[idx] = flat[idx] - c.tau * field[idx];
        }
        for j in 0..n {
            c.refresh_user(j)?;
        }
        c.f = c.f_user.iter().sum();
        Ok(c)
    }

    fn refresh_user(&mut self, j: usize) -> Result<()> {
        let r0 = j * self.k;
        let y = &self.y[r0..r0 + self.k];
        let lam = policy::solve_level(y, &self.marg, |_| 1.0, self.budgets[j])?;
        let (mut w, mut s, mut cnt, mut fu) = (0.0, 0.0, 0.0, 0.0);
        let mut gaps = [(f64::INFINITY, usize::MAX); 2];
        for kk in 0..self.k {
            let yv = self.y[r0 + kk];
            let t = (yv - lam).max(0.0);
            let res = self.p[r0 + kk] - t;
            self.r[r0 + kk] = res;
            fu += res * res;
            if yv > lam {
                w += self.marg[kk];
                s += res;
                cnt += 1.0;
            }
            let gap = (yv - lam).abs();
            if gap < gaps[0].0 {
                gaps[1] = gaps[0];
                gaps[0] = (gap, kk);
            } else if gap < gaps[1].0 {
                gaps[1] = (gap, kk);
            }
        }
        self.lambda[j] = lam;
        self.w[j] = w;
        self.s[j] = s;
        self.cnt[j] = cnt;
        self.f_user[j] = fu;
        self.gaps[j] = gaps;
        Ok(())
    }

    /// `g²` after adding `eps` to `P_i(k0)`; the cache is left untouched.
    fn perturbed(&self, i: usize, k0: usize, eps: f64) -> Result<f64> {
        let mut total = self.f;
        for j in 0..self.n {
            let dy = if j == i {
                (1.0 - self.tau) * eps
            } else {
                -self.tau * self.coupling[k0 * self.n * self.n + j * self.n + i] * eps
            };
            if dy == 0.0 {
                continue;
            }
            let idx = j * self.k + k0;
            let p_new = self.p[idx] + if j == i { eps } else { 0.0 };
            let y_new = self.y[idx] + dy;
            let lam = self.lambda[j];
            let r_old = self.r[idx];
            let min_gap = if self.gaps[j][0].1 == k0 {
                self.gaps[j][1].0
            } else {
                self.gaps[j][0].0
            };
            let delta_f = if self.y[idx] > lam {
                let dl = self.marg[k0] * dy / self.w[j];
                if y_new - (lam + dl) > 0.0 && dl.abs() < 0.5 * min_gap {
                    let r_new = p_new - (y_new - lam - dl);
                    Some(
                        2.0 * dl * (self.s[j] - r_old)
                            + dl * dl * (self.cnt[j] - 1.0)
                            + r_new * r_new
                            - r_old * r_old,
                    )
                } else {
                    None
                }
            } else if y_new <= lam {
                Some(p_new * p_new - r_old * r_old)
            } else {
                None
            };
            total += match delta_f {
                Some(d) => d,
                None => self.recompute_user(j, k0, p_new, y_new)? - self.f_user[j],
            };
        }
        Ok(total)
    }

    fn recompute_user(&self, j: usize, k0: usize, p_new: f64, y_new: f64) -> Result<f64> {
        let r0 = j * self.k;
        let mut y = self.y[r0..r0 + self.k].to_vec();
        y[k0] = y_new;
        let lam = policy::solve_level(&y, &self.marg, |_| 1.0, self.budgets[j])?;
        Ok((0..self.k)
            .map(|kk| {
                let p = if kk == k0 { p_new } else { self.p[r0 + kk] };
                let res = p - (y[kk] - lam).max(0.0);
                res * res
            })
            .sum())
    }
}

fn fd_step(rel: f64, x: f64) -> f64 {
    rel * x.abs().max(1.0)
}

/// Central-difference gradient of `g²` over user `i`'s block.
fn residual_sq_grad(problem: &ViProblem<'_>, flat: &[f64], i: usize, rel: f64) -> Result<Vec<f64>> {
    let game = problem.game;
    if game.variant() == Variant::Full
        && problem.field == FieldKind::Reciprocal
        && problem.mode == ProjectionMode::EqualityBinding
    {
        let cache = FullResidualCache::new(problem, flat)?;
        return (0..game.space().len())
            .map(|k| {
                let h = fd_step(rel, flat[game.offset(i) + k]);
                Ok((cache.perturbed(i, k, h)? - cache.perturbed(i, k, -h)?) / (2.0 * h))
            })
            .collect();
    }
    let mut work = flat.to_vec();
    game.user_range(i)
        .map(|k| {
            let h = fd_step(rel, flat[k]);
            work[k] = flat[k] + h;
            let up = problem.residual_flat(&work)?;
            work[k] = flat[k] - h;
            let down = problem.residual_flat(&work)?;
            work[k] = flat[k];
            Ok((up * up - down * down) / (2.0 * h))
        })
        .collect()
}

/// Public form of the phase-2 gradient, used by tests of the fast path.
pub fn residual_sq_gradient(
    problem: &ViProblem<'_>,
    profile: &PolicyProfile,
    i: usize,
    rel: f64,
) -> Result<Vec<f64>> {
    let flat = problem.game.flatten(profile)?;
    residual_sq_grad(problem, &flat, i, rel)
}

/// Reference central differences that re-evaluate `g²` from scratch.
pub fn residual_sq_gradient_reference(
    problem: &ViProblem<'_>,
    profile: &PolicyProfile,
    i: usize,
    rel: f64,
) -> Result<Vec<f64>> {
    let flat = problem.game.flatten(profile)?;
    let mut work = flat.clone();
    problem
        .game
        .user_range(i)
        .map(|k| {
            let h = fd_step(rel, flat[k]);
            work[k] = flat[k] + h;
            let up = problem.residual_flat(&work)?;
            work[k] = flat[k] - h;
            let down = problem.residual_flat(&work)?;
            work[k] = flat[k];
            Ok((up * up - down * down) / (2.0 * h))
        })
        .collect()
}

/// Backtracking halvings tried before a user's descent step is skipped.
const MAX_BACKTRACK: usize = 30;

/// One projected steepest-descent update of user `i` on `g²`. Returns the
/// new `g²`; the step is kept only if it does not increase `g²`.
fn descent_step(
    problem: &ViProblem<'_>,
    flat: &mut Vec<f64>,
    f_now: f64,
    i: usize,
    gamma: f64,
    rel: f64,
    expand: bool,
) -> Result<f64> {
    let game = problem.game;
    let grad = residual_sq_grad(problem, flat, i, rel)?;
    let range = game.user_range(i);
    let own: Vec<f64> = flat[range.clone()].to_vec();
    let eval = |step: f64| -> Result<(f64, Vec<f64>)> {
        let x: Vec<f64> = own.iter().zip(&grad).map(|(p, d)| p - step * d).collect();
        let proj = policy::project(
            &x,
            game.indexer().marginals(i),
            game.model().budget(i),
            problem.mode,
        )?;
        let mut cand = flat.clone();
        cand[range.clone()].copy_from_slice(&proj.values);
        let r = problem.residual_flat(&cand)?;
        Ok((r * r, cand))
    };
    let mut step = gamma;
    for _ in 0..MAX_BACKTRACK {
        let (f_new, cand) = eval(step)?;
        if f_new <= f_now {
            let (mut best_f, mut best) = (f_new, cand);
            if expand {
                for _ in 0..MAX_BACKTRACK {
                    step *= 2.0;
                    let (f2, c2) = eval(step)?;
                    if f2 >= best_f {
                        break;
                    }
                    best_f = f2;
                    best = c2;
                }
            }
            *flat = best;
            return Ok(best_f);
        }
        step *= 0.5;
    }
    Ok(f_now)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DescentEnd {
    Converged,
    Stalled,
    Exhausted,
}

fn descent(
    problem: &ViProblem<'_>,
    flat: &mut Vec<f64>,
    params: &SolveParams,
    iters: &mut usize,
) -> Result<DescentEnd> {
    let mut r = problem.residual_flat(flat)?;
    if r < params.eps {
        return Ok(DescentEnd::Converged);
    }
    let mut f = r * r;
    let mut gamma = params.gamma0;
    for t in 1..=params.max_descent {
        let prev = flat.clone();
        for i in 0..problem.game.n_users() {
            f = descent_step(
                problem,
                flat,
                f,
                i,
                gamma,
                params.fd_rel_step,
                params.expand_step,
            )?;
        }
        *iters += 1;
        if t % params.gamma_every == 0 {
            gamma /= 1.0 + gamma;
        }
        r = math::sqrt(f);
        if r < params.eps {
            return Ok(DescentEnd::Converged);
        }
        if math::dist(&prev, flat) < params.delta {
            return Ok(DescentEnd::Stalled);
        }
    }
    Ok(DescentEnd::Exhausted)
}

fn report(
    game: &Game,
    flat: &[f64],
    residual: f64,
    picard: usize,
    descent: usize,
    restarts: usize,
    converged: bool,
) -> SolveReport {
    let nats = (0..game.n_users())
        .map(|i| game.rate_flat(i, flat))
        .collect();
    SolveReport {
        profile: game.unflatten(flat),
        residual,
        picard_iterations: picard,
        descent_iterations: descent,
        restarts,
        converged,
        rates: RateReport::from_nats(nats, LogBase::E),
        wall_time: None,
    }
}

/// A single phase-2 run from `start`.
pub fn phase2(
    problem: &ViProblem<'_>,
    start: &PolicyProfile,
    params: &SolveParams,
) -> Result<SolveReport> {
    params.validate()?;
    let mut flat = problem.game.flatten(start)?;
    let mut iters = 0;
    let end = descent(problem, &mut flat, params, &mut iters)?;
    let r = problem.residual_flat(&flat)?;
    Ok(report(
        problem.game,
        &flat,
        r,
        0,
        iters,
        0,
        end == DescentEnd::Converged,
    ))
}

/// Two-phase heuristic from `start`.
pub fn solve_ne_from(
    game: &Game,
    start: &PolicyProfile,
    params: &SolveParams,
) -> Result<SolveReport> {
    params.validate()?;
    let problem = ViProblem::from_params(game, params)?;
    let mut flat = game.flatten(start)?;
    let (mut picard, mut desc, mut restarts) = (0, 0, 0);
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        // g(P^(n)) is the length of the Picard step, so it is checked for free
        let mut early = false;
        for _ in 0..params.max_picard {
            let next = problem.t_flat(&flat)?.0;
            picard += 1;
            if math::dist(&flat, &next) < params.eps {
                early = true;
                break;
            }
            flat = next;
        }
        let end = if early {
            DescentEnd::Converged
        } else {
            descent(&problem, &mut flat, params, &mut desc)?
        };
        let r = problem.residual_flat(&flat)?;
        if best.as_ref().is_none_or(|(b, _)| r < *b) {
            best = Some((r, flat.clone()));
        }
        if end == DescentEnd::Converged {
            return Ok(report(game, &flat, r, picard, desc, restarts, true));
        }
        if restarts == params.max_restarts {
            let (r, flat) = best.expect("at least one phase ran");
            return Ok(report(game, &flat, r, picard, desc, restarts, false));
        }
        restarts += 1;
    }
}

/// Two-phase heuristic from the profile that spends every budget uniformly.
pub fn solve_ne(game: &Game, params: &SolveParams) -> Result<SolveReport> {
    solve_ne_from(game, &policy::uniform_profile(game), params)
}

/// Bisection steps of the exact best-response solver.
const BR_ITER: usize = 200;

/// Exact best response of user `i` to the opponents in `profile`.
///
/// Full information: water-filling. Partial information: the per-user problem
/// is separable over info-states, so the KKT conditions
/// `∂r_i/∂P_i(s) = μ m_i(s)` (or `P_i(s) = 0`) are solved by bisection on
/// `μ` with an inner bisection per state.
pub fn best_response(game: &Game, profile: &PolicyProfile, i: usize) -> Result<PowerPolicy> {
    if game.variant() == Variant::Full {
        return policy::best_response_full(game, profile, i);
    }
    let flat = game.flatten(profile)?;
    let m = game.indexer().marginals(i);
    let budget = game.model().budget(i);
    let scen: Vec<Vec<(f64, f64, f64)>> =
        (0..m.len()).map(|s| game.scenarios(i, s, &flat)).collect();
    let deriv = |s: usize, p: f64| -> f64 {
        scen[s]
            .iter()
            .map(|&(pr, g, int)| pr * g / (1.0 + int + g * p))
            .sum()
    };
    let powers = |mu: f64| -> Vec<f64> {
        (0..m.len())
            .map(|s| {
                let target = mu * m[s];
                if deriv(s, 0.0) <= target {
                    return 0.0;
                }
                // deriv(s, p) <= m[s] / p, so the root lies below 1/μ
                let (mut lo, mut hi) = (0.0, 1.0 / mu);
                for _ in 0..BR_ITER {
                    let mid = 0.5 * (lo + hi);
                    if deriv(s, mid) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-15 * hi {
                        break;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect()
    };
    let spent = |v: &[f64]| -> f64 { v.iter().zip(m).map(|(a, b)| a * b).sum() };
    let mut mu_hi = (0..m.len())
        .map(|s| deriv(s, 0.0) / m[s])
        .fold(0.0, f64::max);
    if !(mu_hi.is_finite() && mu_hi > 0.0) {
        return Err(Error::InnerSolveFailed { user: i });
    }
    let mut mu_lo = 0.5 * mu_hi;
    let mut tries = 0;
    while spent(&powers(mu_lo)) < budget {
        mu_hi = mu_lo;
        mu_lo *= 0.5;
        tries += 1;
        if tries > 2000 {
            return Err(Error::InnerSolveFailed { user: i });
        }
    }
    for _ in 0..BR_ITER {
        let mid = 0.5 * (mu_lo + mu_hi);
        if spent(&powers(mid)) > budget {
            mu_lo = mid;
        } else {
            mu_hi = mid;
        }
        if mu_hi - mu_lo <= 1e-15 * mu_hi {
            break;
        }
    }
    let mut v = powers(mu_hi);
    // close the remaining budget gap on the states already in use
    let used = spent(&v);
    if used > 0.0 {
        let scale = budget / used;
        if (scale - 1.0).abs() < 1e-6 {
            v.iter_mut().for_each(|p| *p *= scale);
        }
    }
    Ok(PowerPolicy::new(i, game.variant(), v))
}

/// Per-user rate gain of the exact best response over the current policy,
/// in nats. A profile is an ε-equilibrium iff every entry is `<= ε`.
pub fn verify_ne(game: &Game, profile: &PolicyProfile) -> Result<Vec<f64>> {
    let flat = game.flatten(profile)?;
    (0..game.n_users())
        .map(|i| {
            let br = best_response(game, profile, i)?;
            let mut alt = flat.clone();
            alt[game.user_range(i)].copy_from_slice(&br.values);
            Ok(game.rate_flat(i, &alt) - game.rate_flat(i, &flat))
        })
        .collect()
}

pub fn is_ne(game: &Game, profile: &PolicyProfile, tol: f64) -> Result<bool> {
    Ok(verify_ne(game, profile)?.iter().all(|d| *d <= tol))
}
