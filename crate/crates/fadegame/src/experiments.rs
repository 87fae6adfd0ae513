//! One function per subcommand. Each runs its grid of (variant, SNR) points
//! on a pool of `jobs` threads, writes CSV files plus `summary.txt` and
//! reports whether every point converged.
//!
//! Point `k` of a grid draws its random numbers from stream `k` of a ChaCha8
//! generator seeded with the config seed, so outputs do not depend on the
//! thread count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fadegame_core::bayes::{self, PowerLevels};
use fadegame_core::pareto::{self, ParetoRun, Start};
use fadegame_core::{
    policy, presets, rates, vi, Game, LogBase, RateReport, SolveReport, Variant, ViProblem,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Disagreement, ExperimentConfig};
use crate::error::{Error, Result};
use crate::output::{self, Provenance};

/// Files written by a run and whether all points converged.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    index: usize,
    variant: Variant,
    snr_db: f64,
}

impl Point {
    fn budget(&self) -> f64 {
        presets::budget_from_snr_db(self.snr_db)
    }

    fn rng(&self, seed: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(self.index as u64);
        r
    }
}

fn grid(cfg: &ExperimentConfig, variants: &[Variant]) -> Vec<Point> {
    let mut out = Vec::new();
    for &variant in variants {
        for &snr_db in &cfg.snr_db {
            out.push(Point {
                index: out.len(),
                variant,
                snr_db,
            });
        }
    }
    out
}

fn game_at(cfg: &ExperimentConfig, p: &Point) -> Result<Game> {
    let model = cfg.model.build(p.budget())?;
    Ok(Game::with_cap(
        model,
        p.variant,
        cfg.solver.enumeration_cap,
    )?)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Pool(e.to_string()))
}

fn par_map<T, F>(jobs: usize, points: &[Point], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Point) -> Result<T> + Sync,
{
    pool(jobs)?.install(|| points.par_iter().map(&f).collect())
}

fn base(cfg: &ExperimentConfig) -> LogBase {
    cfg.log_base.into()
}

fn tuple(r: &[f64]) -> String {
    let parts: Vec<String> = r.iter().map(|x| format!("{x:.2}")).collect();
    format!("({})", parts.join(", "))
}

fn solve(game: &Game, cfg: &ExperimentConfig) -> Result<SolveReport> {
    let t = Instant::now();
    let mut rep = vi::solve_ne(game, &cfg.solver.params())?;
    rep.wall_time = Some(t.elapsed());
    Ok(rep)
}

fn finish(
    dir: &Path,
    mut files: Vec<PathBuf>,
    summary: String,
    converged: bool,
) -> Result<Outcome> {
    files.push(output::write_text(dir, "summary.txt", &summary)?);
    Ok(Outcome {
        files,
        summary,
        converged,
    })
}

#[derive(Debug, Serialize)]
struct NeRow {
    game: &'static str,
    snr_db: f64,
    budget: f64,
    user: usize,
    rate: f64,
    sum_rate: f64,
    residual: f64,
    max_improvement: f64,
    picard_iterations: usize,
    descent_iterations: usize,
    restarts: usize,
    converged: bool,
    wall_time_s: f64,
}

#[derive(Debug, Serialize)]
struct PolicyRow {
    game: &'static str,
    snr_db: f64,
    user: usize,
    info_state_index: usize,
    power: f64,
}

fn policy_rows(out: &mut Vec<PolicyRow>, p: &Point, profile: &fadegame_core::PolicyProfile) {
    for i in 0..profile.n_users() {
        for (s, &power) in profile.values(i).iter().enumerate() {
            out.push(PolicyRow {
                game: p.variant.as_str(),
                snr_db: p.snr_db,
                user: i,
                info_state_index: s,
                power,
            });
        }
    }
}

/// Equilibria over the grid.
pub fn solve_ne(cfg: &ExperimentConfig, jobs: usize) -> Result<Outcome> {
    let points = grid(cfg, &cfg.variants());
    let results = par_map(jobs, &points, |p| {
        let g = game_at(cfg, p)?;
        let rep = solve(&g, cfg)?;
        let improvement = vi::verify_ne(&g, &rep.profile)?
            .into_iter()
            .fold(0.0, f64::max);
        Ok((rep, improvement))
    })?;
    let mut rows = Vec::new();
    let mut policies = Vec::new();
    let mut summary =
        String::from("game      snr_db  residual   max_impr   sum_rate  converged  rates\n");
    let mut all = true;
    for (p, (rep, improvement)) in points.iter().zip(&results) {
        let r = rep.rates.in_base(base(cfg));
        for (user, &rate) in r.rates.iter().enumerate() {
            rows.push(NeRow {
                game: p.variant.as_str(),
                snr_db: p.snr_db,
                budget: p.budget(),
                user,
                rate,
                sum_rate: r.sum,
                residual: rep.residual,
                max_improvement: *improvement,
                picard_iterations: rep.picard_iterations,
                descent_iterations: rep.descent_iterations,
                restarts: rep.restarts,
                converged: rep.converged,
                wall_time_s: rep.wall_time.map_or(0.0, |d| d.as_secs_f64()),
            });
        }
        policy_rows(&mut policies, p, &rep.profile);
        all &= rep.converged;
        let _ = writeln!(
            summary,
            "{:<9} {:>6}  {:<9.2e}  {:<9.2e}  {:<8.4}  {:<9}  {}",
            p.variant.as_str(),
            p.snr_db,
            rep.residual,
            improvement,
            r.sum,
            rep.converged,
            tuple(&r.rates)
        );
    }
    let prov = Provenance::new("solve-ne", cfg)?;
    let files = vec![
        output::write_csv(&cfg.out, "ne.csv", &prov, &rows)?,
        output::write_csv(&cfg.out, "ne_policies.csv", &prov, &policies)?,
    ];
    finish(&cfg.out, files, summary, all)
}

#[derive(Debug, Serialize)]
struct Phase1Row {
    game: &'static str,
    snr_db: f64,
    starts: usize,
    max: usize,
    tau: f64,
    mean_before_tau1: f64,
    mean_before: f64,
    mean_after: f64,
    max_after: f64,
}

/// Mean residual of random feasible profiles before and after phase 1.
///
/// `mean_before_tau1` evaluates the residual with `τ = 1`, `mean_before`
/// and `mean_after` with the configured `τ`.
pub fn phase1_study(cfg: &ExperimentConfig, jobs: usize) -> Result<Outcome> {
    let points = grid(cfg, &cfg.variants());
    let (starts, max) = (cfg.phase1.starts, cfg.phase1.max);
    let results = par_map(jobs, &points, |p| {
        let g = game_at(cfg, p)?;
        let params = cfg.solver.params();
        let pr = ViProblem::from_params(&g, &params)?;
        let unit = ViProblem::with_field(&g, 1.0, params.mode, params.field)?;
        let mut rng = p.rng(cfg.seed);
        let (mut b1, mut b, mut a, mut amax) = (0.0, 0.0, 0.0, 0.0f64);
        for _ in 0..starts {
            let start = policy::random_feasible_profile(&g, &mut rng)?;
            b1 += unit.residual(&start)?;
            b += pr.residual(&start)?;
            let after = pr.residual(&vi::phase1(&pr, &start, max)?)?;
            a += after;
            amax = amax.max(after);
        }
        let k = starts as f64;
        Ok(Phase1Row {
            game: p.variant.as_str(),
            snr_db: p.snr_db,
            starts,
            max,
            tau: params.tau,
            mean_before_tau1: b1 / k,
            mean_before: b / k,
            mean_after: a / k,
            max_after: amax,
        })
    })?;
    let variants = cfg.variants();
    let mut summary = format!("mean g(P) over {starts} random starts, {max} phase-1 iterations\n");
    summary.push_str("before: tau = 1 [tau = configured]\n\nSNR(dB)");
    for v in &variants {
        let _ = write!(summary, " | {:<26} {:<10}", format!("{v} before"), "after");
    }
    summary.push('\n');
    for &snr in &cfg.snr_db {
        let _ = write!(summary, "{snr:>7}");
        for v in &variants {
            let r = results
                .iter()
                .find(|r| r.game == v.as_str() && r.snr_db == snr)
                .expect("grid point");
            let before = format!("{:.4} [{:.4}]", r.mean_before_tau1, r.mean_before);
            let _ = write!(summary, " | {:<26} {:<10.3e}", before, r.mean_after);
        }
        summary.push('\n');
    }
    let prov = Provenance::new("phase1-study", cfg)?;
    let files = vec![output::write_csv(&cfg.out, "phase1.csv", &prov, &results)?];
    finish(&cfg.out, files, summary, true)
}

#[derive(Debug, Serialize)]
struct SweepRow {
    game: &'static str,
    snr_db: f64,
    budget: f64,
    user: usize,
    rate: f64,
    sum_rate: f64,
    lower_bound_rate: Option<f64>,
    residual: f64,
    converged: bool,
    wall_time_s: f64,
}

/// Equilibrium rates and, for the partial-information games, the
/// distribution-only lower bound, as plot-ready rows.
pub fn sweep(cfg: &ExperimentConfig, jobs: usize) -> Result<Outcome> {
    let points = grid(cfg, &cfg.variants());
    let results = par_map(jobs, &points, |p| {
        let g = game_at(cfg, p)?;
        let rep = solve(&g, cfg)?;
        let bounds = match p.variant {
            Variant::Full => None,
            _ => Some(
                (0..g.n_users())
                    .map(|i| {
                        rates::lower_bound_rate(&g, i, &rates::lower_bound_maximizer(&g, i)?.values)
                    })
                    .collect::<fadegame_core::Result<Vec<f64>>>()?,
            ),
        };
        Ok((rep, bounds))
    })?;
    let b = base(cfg);
    let mut rows = Vec::new();
    let mut summary = String::from("game      snr_db  sum_rate  lower_bound_sum  converged\n");
    let mut all = true;
    for (p, (rep, bounds)) in points.iter().zip(&results) {
        let r = rep.rates.in_base(b);
        let lb = bounds.as_ref().map(|v| RateReport::from_nats(v.clone(), b));
        for (user, &rate) in r.rates.iter().enumerate() {
            rows.push(SweepRow {
                game: p.variant.as_str(),
                snr_db: p.snr_db,
                budget: p.budget(),
                user,
                rate,
                sum_rate: r.sum,
                lower_bound_rate: lb.as_ref().map(|l| l.rates[user]),
                residual: rep.residual,
                converged: rep.converged,
                wall_time_s: rep.wall_time.map_or(0.0, |d| d.as_secs_f64()),
            });
        }
        all &= rep.converged;
        let lb_sum = lb.map_or("-".to_string(), |l| format!("{:.4}", l.sum));
        let _ = writeln!(
            summary,
            "{:<9} {:>6}  {:<8.4}  {:<15}  {}",
            p.variant.as_str(),
            p.snr_db,
            r.sum,
            lb_sum,
            rep.converged
        );
    }
    let prov = Provenance::new("sweep", cfg)?;
    let files = vec![output::write_csv(&cfg.out, "sweep.csv", &prov, &rows)?];
    finish(&cfg.out, files, summary, all)
}

#[derive(Debug, Serialize)]
struct ParetoRow {
    game: &'static str,
    snr_db: f64,
    objective: &'static str,
    user: usize,
    rate: f64,
    sum_rate: f64,
    ne_sum_rate: f64,
    objective_value: f64,
    start: String,
    converged: bool,
    outer_iterations: usize,
    ascent_rounds: usize,
    starts_run: usize,
    starts_skipped: usize,
}

struct Social {
    ne_rates: RateReport,
    pareto: pareto::ParetoReport,
    bargain: Option<pareto::ParetoReport>,
}

fn social_point(cfg: &ExperimentConfig, p: &Point, bargain: bool) -> Result<Social> {
    let g = game_at(cfg, p)?;
    let ne = solve(&g, cfg)?;
    let mut rng = p.rng(cfg.seed);
    let mut starts =
        pareto::default_starts(&g, Some(&ne.profile), cfg.pareto.random_starts, &mut rng)?;
    let params = cfg.pareto.params();
    let objective = cfg.objective.weighted_sum(g.n_users());
    let ws = pareto::solve_pareto(&g, &objective, &params, &starts)?;
    let nb = if bargain {
        let d = match cfg.objective.disagreement {
            Disagreement::Zero => vec![0.0; g.n_users()],
            Disagreement::Ne => ne.rates.rates.clone(),
        };
        starts.push(Start {
            label: "pareto".into(),
            profile: ws.best.profile.clone(),
        });
        Some(pareto::solve_bargaining(&g, &d, &params, &starts)?)
    } else {
        None
    };
    Ok(Social {
        ne_rates: ne.rates,
        pareto: ws,
        bargain: nb,
    })
}

fn social_rows(
    out: &mut Vec<ParetoRow>,
    p: &Point,
    kind: &'static str,
    rep: &pareto::ParetoReport,
    ne: &RateReport,
    b: LogBase,
) {
    let best: &ParetoRun = &rep.best;
    let r = best.rates.in_base(b);
    for (user, &rate) in r.rates.iter().enumerate() {
        out.push(ParetoRow {
            game: p.variant.as_str(),
            snr_db: p.snr_db,
            objective: kind,
            user,
            rate,
            sum_rate: r.sum,
            ne_sum_rate: ne.in_base(b).sum,
            objective_value: best.objective_value,
            start: best.start.clone(),
            converged: best.converged,
            outer_iterations: best.outer_iterations,
            ascent_rounds: best.ascent_rounds,
            starts_run: rep.runs.len(),
            starts_skipped: rep.skipped.len(),
        });
    }
}

/// Weighted-sum Pareto points over the grid.
pub fn pareto(cfg: &ExperimentConfig, jobs: usize) -> Result<Outcome> {
    let points = grid(cfg, &cfg.variants());
    let results = par_map(jobs, &points, |p| social_point(cfg, p, false))?;
    let b = base(cfg);
    let mut rows = Vec::new();
    let mut summary =
        String::from("game      snr_db  ne_sum    pareto_sum  converged  rates at Pareto point\n");
    let mut all = true;
    for (p, s) in points.iter().zip(&results) {
        social_rows(&mut rows, p, "weighted-sum", &s.pareto, &s.ne_rates, b);
        let r = s.pareto.best.rates.in_base(b);
        all &= s.pareto.best.converged;
        let _ = writeln!(
            summary,
            "{:<9} {:>6}  {:<8.4}  {:<10.4}  {:<9}  {}",
            p.variant.as_str(),
            p.snr_db,
            s.ne_rates.in_base(b).sum,
            r.sum,
            s.pareto.best.converged,
            tuple(&r.rates)
        );
    }
    let prov = Provenance::new("pareto", cfg)?;
    let files = vec![output::write_csv(&cfg.out, "pareto.csv", &prov, &rows)?];
    finish(&cfg.out, files, summary, all)
}

#[derive(Debug, Serialize)]
struct FairnessRow {
    game: &'static str,
    snr_db: f64,
    pareto_rates: String,
    bargaining_rates: String,
    pareto_spread: f64,
    bargaining_spread: f64,
    pareto_sum: f64,
    bargaining_sum: f64,
}

/// Nash bargaining over the grid, with the weighted-sum Pareto point of the
/// same starts for the fairness comparison.
pub fn bargain(cfg: &ExperimentConfig, jobs: usize) -> Result<Outcome> {
    let points = grid(cfg, &cfg.variants());
    let results = par_map(jobs, &points, |p| social_point(cfg, p, true))?;
    let b = base(cfg);
    let mut rows = Vec::new();
    let mut fairness = Vec::new();
    let mut summary = String::from(
        "game      SNR(dB)  Rates at Pareto point   Rates at Nash bargaining  converged\n",
    );
    let mut all = true;
    for (p, s) in points.iter().zip(&results) {
        let nb = s.bargain.as_ref().expect("bargaining requested");
        social_rows(&mut rows, p, "nash-product", nb, &s.ne_rates, b);
        let (pr, nr) = (s.pareto.best.rates.in_base(b), nb.best.rates.in_base(b));
        all &= nb.best.converged;
        fairness.push(FairnessRow {
            game: p.variant.as_str(),
            snr_db: p.snr_db,
            pareto_rates: tuple(&pr.rates),
            bargaining_rates: tuple(&nr.rates),
            pareto_spread: pr.spread(),
            bargaining_spread: nr.spread(),
            pareto_sum: pr.sum,
            bargaining_sum: nr.sum,
        });
        let _ = writeln!(
            summary,
            "{:<9} {:>7}  {:<22}  {:<24}  {}",
            p.variant.as_str(),
            p.snr_db,
            tuple(&pr.rates),
            tuple(&nr.rates),
            nb.best.converged
        );
    }
    let prov = Provenance::new("bargain", cfg)?;
    let files = vec![
        output::write_csv(&cfg.out, "bargain.csv", &prov, &rows)?,
        output::write_csv(&cfg.out, "fairness.csv", &prov, &fairness)?,
    ];
    finish(&cfg.out, files, summary, all)
}

#[derive(Debug, Serialize)]
struct BayesRow {
    snr_db: f64,
    budget: f64,
    seed: u64,
    user: usize,
    rate: f64,
    slots: usize,
    converged: bool,
    epsilon: f64,
    max_improvement: f64,
    checks: usize,
    strategy_changes: usize,
    feasible_strategies: usize,
}

#[derive(Debug, Serialize)]
struct TraceRow {
    snr_db: f64,
    seed: u64,
    slot: usize,
    user: usize,
    state: usize,
    action: f64,
    interference: f64,
}

#[derive(Debug, Serialize)]
struct StrategyRow {
    snr_db: f64,
    seed: u64,
    user: usize,
    state: usize,
    gain: f64,
    power: f64,
}

/// Bayesian learning in the direct-gain game, `bayes.runs` seeds per SNR.
pub fn bayes(cfg: &ExperimentConfig, jobs: usize) -> Result<Outcome> {
    let n = cfg.n_users()?;
    let levels = PowerLevels::uniform(n, cfg.bayes.levels.clone())?;
    let params = cfg.bayes.params(cfg.solver.enumeration_cap);
    let runs: Vec<(f64, u64)> = cfg
        .snr_db
        .iter()
        .flat_map(|&s| (0..cfg.bayes.runs as u64).map(move |k| (s, k)))
        .collect();
    let traces = pool(jobs)?.install(|| {
        runs.par_iter()
            .map(|&(snr, k)| {
                let model = cfg.model.build(presets::budget_from_snr_db(snr))?;
                Ok(bayes::simulate(&model, &levels, &params, cfg.seed + k)?)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let b = base(cfg);
    let mut rows = Vec::new();
    let mut trace_rows = Vec::new();
    let mut strategies = Vec::new();
    let mut summary = String::from("SNR(dB)  seed  slots   converged  rates at epsilon-NE\n");
    let mut all = true;
    for (&(snr, k), t) in runs.iter().zip(&traces) {
        let seed = cfg.seed + k;
        let model = cfg.model.build(presets::budget_from_snr_db(snr))?;
        let r = t.rates.in_base(b);
        let max_improvement = t.checks.last().map_or(f64::NAN, |(_, c)| {
            c.improvements.iter().cloned().fold(0.0, f64::max)
        });
        for (user, &rate) in r.rates.iter().enumerate() {
            rows.push(BayesRow {
                snr_db: snr,
                budget: presets::budget_from_snr_db(snr),
                seed,
                user,
                rate,
                slots: t.slots_played,
                converged: t.converged,
                epsilon: params.epsilon,
                max_improvement,
                checks: t.checks.len(),
                strategy_changes: t.changes.len(),
                feasible_strategies: t.feasible_counts[user],
            });
        }
        for rec in &t.slots {
            for user in 0..n {
                trace_rows.push(TraceRow {
                    snr_db: snr,
                    seed,
                    slot: rec.slot,
                    user,
                    state: rec.states[user],
                    action: rec.powers[user],
                    interference: rec.interference[user],
                });
            }
        }
        for (user, st) in t.strategies.iter().enumerate() {
            for (state, power) in st.powers(levels.user(user)).into_iter().enumerate() {
                let gain = model.direct(user).values()[state];
                strategies.push(StrategyRow {
                    snr_db: snr,
                    seed,
                    user,
                    state,
                    gain,
                    power,
                });
            }
        }
        all &= t.converged;
        let _ = writeln!(
            summary,
            "{snr:>7}  {seed:>4}  {:>6}  {:<9}  {}",
            t.slots_played,
            t.converged,
            tuple(&r.rates)
        );
    }
    let prov = Provenance::new("bayes", cfg)?;
    let mut files = vec![
        output::write_csv(&cfg.out, "bayes.csv", &prov, &rows)?,
        output::write_csv(&cfg.out, "bayes_strategies.csv", &prov, &strategies)?,
    ];
    if cfg.bayes.trace {
        files.push(output::write_csv(
            &cfg.out,
            "bayes_trace.csv",
            &prov,
            &trace_rows,
        )?);
    }
    finish(&cfg.out, files, summary, all)
}
