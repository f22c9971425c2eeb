//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;

use sbsde::bsde::{exit_fraction, residual_rms, simulate_paths, terminal_statistics, ClassStats, SamplePath};
use sbsde::densities::{constrained_density, exit_cdf, exit_density, Truncation};
use sbsde::feynman_kac::McConfig;
use sbsde::model::{blowup_solution, ProblemParams, Regime};
use sbsde::pde::{
    pde_residual, solve_linear_v0, solve_u, solve_ubar_n, solve_umn, solve_un, solve_vbar, solve_vbar_n, Field, Grid,
    Schedule, SolveReport, SweepConfig,
};
use sbsde::quadrature::gauss_kronrod;
use sbsde::verify::{run_criterion, suite, Budget, VerifyConfig, DENSITY_MASS_MIN};

use crate::config::Config;
use crate::plot::{Plot, Series, PALETTE};
use crate::{CliError, DensityArgs, ProblemArgs, SimulateArgs, SolveArgs, VerifyArgs};

type Result<T> = std::result::Result<T, CliError>;

/// Per-path CSV and SVG files are written for at most this many paths.
const MAX_PATH_FILES: usize = 100;

pub struct Context {
    pub cfg: Config,
    pub out: PathBuf,
    pub plot: bool,
}

impl Context {
    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        std::fs::write(&path, contents)?;
        Ok(path)
    }

    fn write_plot(&self, name: &str, plot: &Plot) -> Result<Option<PathBuf>> {
        if !self.plot {
            return Ok(None);
        }
        self.write(name, &plot.to_svg()).map(Some)
    }

    /// Writes the resolved configuration next to the outputs.
    fn write_run_config(&self) -> Result<PathBuf> {
        self.write("run.cfg", &self.cfg.render())
    }
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

pub fn density(ctx: &Context, a: DensityArgs) -> Result<()> {
    let c = &ctx.cfg;
    let l: f64 = c.require("L", a.l)?;
    let x = c.or("x", a.x, 0.5 * l)?;
    let t = c.or("t", a.t, 0.0)?;
    let span = c.or("span", a.span, 0.5 * l * l)?;
    let samples = c.or("samples", a.samples, 800)?;
    let with_cdf = c.switch("cdf", a.cdf)?;
    let endpoint = c.get("a", a.a)?;
    let check_mass = c.switch("check-mass", a.check_mass)?;
    c.reject_unknown()?;
    if !(span > 0.0) || samples < 2 {
        return Err(CliError::Usage("need span > 0 and samples >= 2".into()));
    }
    let mass_window = 50.0 * l * l;
    let p = ProblemParams::new(3.0, l, t + span.max(mass_window), Regime::OutsideBall)?;
    let tr = Truncation::default();

    let mut csv = String::from("s,f_tau");
    if with_cdf {
        csv.push_str(",exit_cdf");
    }
    if endpoint.is_some() {
        csv.push_str(",f_w");
    }
    csv.push('\n');
    let mut f_tau = Vec::with_capacity(samples);
    let mut f_w = Vec::new();
    for k in 1..=samples {
        let s = t + span * k as f64 / samples as f64;
        let f = exit_density(x, t, s, &p, tr)?.value;
        f_tau.push((s, f));
        let _ = write!(csv, "{s:?},{f:?}");
        if with_cdf {
            let _ = write!(csv, ",{:?}", exit_cdf(x, t, s, &p, tr)?.value);
        }
        if let Some(a) = endpoint {
            let w = constrained_density(x, t, s, a, &p, tr)?.value;
            f_w.push((s, w));
            let _ = write!(csv, ",{w:?}");
        }
        csv.push('\n');
    }
    let mut written = vec![ctx.write("density.csv", &csv)?];
    let mut series = vec![Series::new("f_tau", f_tau, 2.0, PALETTE[0])];
    if let Some(a) = endpoint {
        series.push(Series::new(format!("f_W (a = {a})"), f_w, 1.5, PALETTE[1]));
    }
    let plot = Plot {
        title: format!("exit-time density, L = {l}, x = {x}, t = {t}"),
        x_label: "s".into(),
        y_label: "density".into(),
        series,
        y_max: None,
    };
    written.extend(ctx.write_plot("density.svg", &plot)?);
    written.push(ctx.write_run_config()?);
    report_written(&written);

    if check_mass {
        let mass = gauss_kronrod(
            |s: f64| exit_density(x, t, s, &p, tr).map(|v| v.value).unwrap_or(f64::NAN),
            t,
            t + mass_window,
            1e-12,
            2000,
        )
        .value;
        println!("mass over (t, t + 50 L^2] = {mass:.12}");
        if !(mass >= DENSITY_MASS_MIN) {
            return Err(CliError::Verification(format!("mass {mass} is below {DENSITY_MASS_MIN}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Umn { m: u64, n: u64 },
    U,
    Un(u64),
    UbarN(u64),
    VbarN(u64),
    Vbar,
    V0,
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kind::Umn { m, n } => write!(f, "u_(m,n), m = {m}, n = {n}"),
            Kind::U => f.write_str("u (limit)"),
            Kind::Un(n) => write!(f, "u_n, n = {n}"),
            Kind::UbarN(n) => write!(f, "ubar_n, n = {n}"),
            Kind::VbarN(n) => write!(f, "vbar_n, n = {n}"),
            Kind::Vbar => f.write_str("vbar (limit)"),
            Kind::V0 => f.write_str("v0 (linear)"),
        }
    }
}

struct Problem {
    params: ProblemParams<f64>,
    grid: Grid<f64>,
    kind: Kind,
    tol: f64,
}

fn parse_regime(s: &str) -> Result<Regime> {
    match s {
        "outside" => Ok(Regime::OutsideBall),
        "inside" => Ok(Regime::InsideBall),
        _ => Err(CliError::Usage(format!("regime must be 'outside' or 'inside', got '{s}'"))),
    }
}

fn problem(c: &Config, a: &ProblemArgs) -> Result<Problem> {
    let regime_name = c.or("regime", a.regime.clone(), "outside".to_string())?;
    let regime = parse_regime(&regime_name)?;
    let default_q = if regime == Regime::OutsideBall { 3.0 } else { 2.0 };
    let q = c.or("q", a.q, default_q)?;
    let l: f64 = c.require("L", a.l)?;
    let t_end = c.or("T", a.t_end, 1.0)?;
    let dx = c.or("dx", a.dx, 0.1)?;
    let dt = c.or("dt", a.dt, 0.01)?;
    let tol = c.or("tol", a.tol, 1e-6)?;
    let m = c.get("m", a.m)?;
    let n = c.get("n", a.n)?;
    let ubar_n = c.get("ubar-n", a.ubar_n)?;
    let vbar_n = c.get("vbar-n", a.vbar_n)?;
    let inferred = if ubar_n.is_some() {
        "ubar_n"
    } else if vbar_n.is_some() {
        "vbar_n"
    } else if m.is_some() || n.is_some() || regime == Regime::OutsideBall {
        "umn"
    } else {
        "ubar_n"
    };
    let kind_name = c.or("kind", a.kind.clone(), inferred.to_string())?;
    let kind = match kind_name.as_str() {
        "umn" => Kind::Umn { m: m.unwrap_or(100), n: n.unwrap_or(50) },
        "u" => Kind::U,
        "un" => Kind::Un(n.unwrap_or(50)),
        "ubar_n" => Kind::UbarN(ubar_n.or(n).unwrap_or(50)),
        "vbar_n" => Kind::VbarN(vbar_n.or(n).unwrap_or(50)),
        "vbar" => Kind::Vbar,
        "v0" => Kind::V0,
        other => return Err(CliError::Usage(format!("unknown kind '{other}'"))),
    };
    let params = ProblemParams::new(q, l, t_end, regime)?;
    let grid = Grid::from_steps(params, dx, dt)?;
    Ok(Problem { params, grid, kind, tol })
}

fn run_solve(pb: &Problem) -> Result<(Field<f64>, Option<SolveReport<f64>>)> {
    let g = &pb.grid;
    Ok(match pb.kind {
        Kind::Umn { m, n } => (solve_umn(m, n, g)?, None),
        Kind::Un(n) => (solve_un(n, g)?, None),
        Kind::UbarN(n) => (solve_ubar_n(n, g)?, None),
        Kind::VbarN(n) => (solve_vbar_n(n, g)?, None),
        Kind::V0 => (solve_linear_v0(g)?, None),
        Kind::U => {
            let (f, r) = solve_u(g, &Schedule::default_for(&pb.params), SweepConfig { tol: pb.tol, eps: 0.0 })?;
            (f, Some(r))
        }
        Kind::Vbar => {
            let ns: Vec<u64> = (2..=14).map(|e| 1u64 << e).collect();
            let eps = 0.1 * pb.params.t_end();
            let (f, r) = solve_vbar(g, &ns, SweepConfig { tol: pb.tol, eps })?;
            (f, Some(r))
        }
    })
}

fn describe_report(r: &SolveReport<f64>) {
    if let Some((idx, d)) = r.monotone_sweep.last() {
        println!("last sweep step (m = {}, n = {}): sup change {d:.3e}", idx.m, idx.n);
    }
    println!("converged: {}", r.converged);
}

/// Profiles `x ↦ V(x, t)` at five times.
fn profile_plot(field: &Field<f64>, title: String) -> Plot {
    let g = field.grid();
    let k_end = field.k_end();
    let series = (0..5)
        .map(|j| {
            // The last profile stops one row short of the terminal corners.
            let k = (j * k_end.saturating_sub(1)) / 4;
            let pts = (0..=g.nx() + 1).map(|i| (g.x(i), field.at(i, k))).collect();
            Series::new(format!("t = {:.3}", g.t(k)), pts, 1.5, PALETTE[j % PALETTE.len()])
        })
        .collect();
    Plot { title, x_label: "x".into(), y_label: "value".into(), series, y_max: None }
}

fn parse_slice(s: &str) -> Result<f64> {
    let v = s.trim().strip_prefix("x=").unwrap_or(s.trim());
    v.parse().map_err(|_| CliError::Usage(format!("slice must look like x=1.5, got '{s}'")))
}

pub fn solve(ctx: &Context, a: SolveArgs) -> Result<()> {
    let c = &ctx.cfg;
    let pb = problem(c, &a.problem)?;
    let slice = c.get("slice", a.slice)?.map(|s| parse_slice(&s)).transpose()?;
    c.reject_unknown()?;
    if let Some(x) = slice {
        if !(0.0..=pb.params.l()).contains(&x) {
            return Err(CliError::Domain(format!("slice point {x} is outside [0, L]")));
        }
    }
    let (field, report) = run_solve(&pb)?;
    println!("{} on nx = {}, nt = {}: residual {:.3e}", pb.kind, pb.grid.nx(), pb.grid.nt(), pde_residual(&field));
    if let Some(r) = &report {
        describe_report(r);
    }
    let mut written = vec![ctx.write("field.csv", &field.to_csv())?];
    written.extend(ctx.write_plot("profiles.svg", &profile_plot(&field, pb.kind.to_string()))?);
    if let Some(x) = slice {
        let mut csv = String::from("t,value,y\n");
        let (mut vals, mut ys) = (Vec::new(), Vec::new());
        for k in 0..=field.k_end() {
            let t = field.grid().t(k);
            let v = field.interp(x, t)?;
            let y = blowup_solution(t, &pb.params).unwrap_or(f64::INFINITY);
            let _ = writeln!(csv, "{t:?},{v:?},{y:?}");
            vals.push((t, v));
            ys.push((t, y));
        }
        let top = vals.iter().map(|p| p.1).fold(0.0, f64::max);
        let plot = Plot {
            title: format!("{} at x = {x}", pb.kind),
            x_label: "t".into(),
            y_label: "value".into(),
            series: vec![Series::new("field", vals, 2.0, PALETTE[0]), Series::new("y_t", ys, 1.0, PALETTE[1])],
            y_max: Some(1.5 * top.max(1.0)),
        };
        written.push(ctx.write("slice.csv", &csv)?);
        written.extend(ctx.write_plot("slice.svg", &plot)?);
    }
    written.push(ctx.write_run_config()?);
    report_written(&written);
    Ok(())
}

fn path_plot(path: &SamplePath<f64>, index: usize, l: f64) -> Plot {
    let w = path.times.iter().zip(&path.w).map(|(&t, &w)| (t, w)).collect();
    let y: Vec<(f64, f64)> = path.times.iter().zip(&path.y).map(|(&t, &y)| (t, y)).collect();
    let y0 = y.first().map_or(1.0, |p| p.1);
    let label = if path.exited() { "exited" } else { "survived" };
    Plot {
        title: format!("path {index} ({label})"),
        x_label: "t".into(),
        y_label: "W, Y".into(),
        series: vec![Series::new("W", w, 1.0, PALETTE[5]), Series::new("Y", y, 2.5, PALETTE[0])],
        y_max: Some(10.0 * y0.max(l)),
    }
}

fn class_rows(csv: &mut String, name: &str, s: &ClassStats<f64>) {
    let _ = writeln!(csv, "{name}_count,{}", s.count);
    let _ = writeln!(csv, "{name}_mean_terminal,{:?}", s.mean_terminal);
    let _ = writeln!(csv, "{name}_max_abs_terminal,{:?}", s.max_abs_terminal);
    let _ = writeln!(csv, "{name}_max_post_exit_gap,{:?}", s.max_post_exit_gap);
    let _ = writeln!(csv, "{name}_max_jump_at_exit,{:?}", s.max_jump_at_exit);
}

pub fn simulate(ctx: &Context, a: SimulateArgs) -> Result<()> {
    let c = &ctx.cfg;
    let x0_given = c.get("x0", a.x0)?;
    if let Some(x0) = x0_given {
        if !(x0 > 0.0) {
            return Err(CliError::Domain(format!("x0 = {x0} is not inside (0, L)")));
        }
    }
    let from_field = c.get("from-field", a.from_field.map(|p| p.display().to_string()))?;
    let (field, params) = match &from_field {
        Some(path) => {
            let text = std::fs::read_to_string(Path::new(path))
                .map_err(|e| CliError::Usage(format!("cannot read field {path}: {e}")))?;
            let f = Field::<f64>::from_csv(&text)?;
            let p = *f.params();
            (Some(f), p)
        }
        None => (None, problem(c, &a.problem)?.params),
    };
    let l = params.l();
    let x0 = c.or("x0", x0_given, 0.5 * l)?;
    let paths = c.or("paths", a.paths, 2)?;
    let seed = c.or("seed", a.seed, 1)?;
    let dt_sim = c.or("dt-sim", a.dt_sim, 1e-3)?;
    let stats_only = c.switch("stats-only", a.stats_only)?;
    let stats_sample = c.or("stats-sample", a.stats_sample, 10_000)?;
    c.reject_unknown()?;
    if !(x0 < l) {
        return Err(CliError::Domain(format!("x0 = {x0} is not inside (0, L) with L = {l}")));
    }
    let mc = McConfig::new(paths, dt_sim, seed);
    mc.validate()?;
    let field = match field {
        Some(f) => f,
        None => {
            let pb = problem(c, &a.problem)?;
            run_solve(&pb)?.0
        }
    };

    let stored = paths.min(stats_sample.max(1));
    let sample = simulate_paths(x0, &field, &params, &McConfig { n_paths: stored, ..mc })?;
    let mut written = Vec::new();
    if !stats_only {
        for (i, path) in sample.iter().take(MAX_PATH_FILES).enumerate() {
            written.push(ctx.write(&format!("path_{i}.csv"), &path.to_csv())?);
            written.extend(ctx.write_plot(&format!("path_{i}.svg"), &path_plot(path, i, l))?);
        }
    }

    let frac = exit_fraction(x0, &params, &mc)?;
    let exact = exit_cdf(x0, 0.0, params.t_end(), &params, Truncation::default())?.value;
    let z = if frac.std_error > 0.0 { (frac.mean - exact).abs() / frac.std_error } else { f64::NAN };
    let terminal = terminal_statistics(&sample)?;
    let rms = residual_rms(x0, &field, &params, &McConfig { n_paths: stored, ..mc }, 0.9)?;

    let mut csv = String::from("quantity,value\n");
    let _ = writeln!(csv, "paths,{paths}");
    let _ = writeln!(csv, "exit_fraction,{:?}", frac.mean);
    let _ = writeln!(csv, "exit_fraction_se,{:?}", frac.std_error);
    let _ = writeln!(csv, "exit_cdf,{exact:?}");
    let _ = writeln!(csv, "abs_gap_over_se,{z:?}");
    let _ = writeln!(csv, "stats_paths,{stored}");
    class_rows(&mut csv, "exited", &terminal.exited);
    class_rows(&mut csv, "survived", &terminal.survived);
    let _ = writeln!(csv, "residual_rms_0.9T,{rms:?}");
    written.push(ctx.write("summary.csv", &csv)?);
    written.push(ctx.write_run_config()?);

    println!("{:<28} {:>14}", "quantity", "value");
    println!("{:<28} {:>14.6}", "exit fraction (MC)", frac.mean);
    println!("{:<28} {:>14.6}", "standard error", frac.std_error);
    println!("{:<28} {:>14.6}", "exit cdf (series)", exact);
    println!("{:<28} {:>14.3}", "|MC - series| / SE", z);
    println!(
        "{:<28} {:>14}",
        "exited / survived (sample)",
        format!("{}/{}", terminal.exited.count, terminal.survived.count)
    );
    println!("{:<28} {:>14.3e}", "max |Y_T| survived", terminal.survived.max_abs_terminal);
    println!(
        "{:<28} {:>14.3e}",
        "max post-exit gap",
        terminal.exited.max_post_exit_gap.max(terminal.survived.max_post_exit_gap)
    );
    println!("{:<28} {:>14.3e}", "residual RMS on [0, 0.9T]", rms);
    report_written(&written);
    Ok(())
}

pub fn verify(ctx: &Context, a: VerifyArgs) -> Result<()> {
    let c = &ctx.cfg;
    let name = c.or("suite", a.suite, "all".to_string())?;
    let quick = c.switch("quick", a.quick)?;
    let base = VerifyConfig::default();
    let seed = c.or("seed", a.seed, base.seed)?;
    let o = base.outside;
    let i = base.inside;
    let outside = ProblemParams::new(
        c.or("q", a.q, o.q())?,
        c.or("L", a.l, o.l())?,
        c.or("T", a.t_end, o.t_end())?,
        Regime::OutsideBall,
    )?;
    let inside = ProblemParams::new(
        c.or("inside-q", a.inside_q, i.q())?,
        c.or("inside-L", a.inside_l, i.l())?,
        c.or("inside-T", a.inside_t, i.t_end())?,
        Regime::InsideBall,
    )?;
    let report_path = c.get("report", a.report.map(|p| p.display().to_string()))?;
    c.reject_unknown()?;
    let ids = suite(&name).ok_or_else(|| CliError::Usage(format!("unknown suite '{name}'")))?;
    let budget = if quick { Budget::Quick } else { Budget::Full };
    let vc = VerifyConfig { outside, inside, budget, seed };

    let mut criteria = Vec::new();
    let mut failed = 0;
    for &id in ids {
        let entry = match run_criterion(id, &vc) {
            Ok(r) => {
                if !r.passed() {
                    failed += 1;
                }
                json!({
                    "id": id,
                    "title": r.title,
                    "passed": r.passed(),
                    "seconds": r.seconds,
                    "metrics": r.metrics.iter().map(|m| json!({
                        "name": m.name,
                        "value": m.value,
                        "limit": m.limit,
                        "ok": m.ok,
                    })).collect::<Vec<_>>(),
                })
            }
            Err(e) => {
                failed += 1;
                json!({ "id": id, "passed": false, "error": e.to_string() })
            }
        };
        criteria.push(entry);
    }
    let params = |p: &ProblemParams<f64>| json!({ "q": p.q(), "L": p.l(), "T": p.t_end() });
    let doc = json!({
        "suite": name,
        "budget": if quick { "quick" } else { "full" },
        "seed": seed,
        "outside": params(&outside),
        "inside": params(&inside),
        "passed": failed == 0,
        "criteria": criteria,
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Runtime(e.to_string()))? + "\n";
    print!("{text}");
    if let Some(path) = report_path {
        std::fs::write(&path, &text)?;
    }
    if failed > 0 {
        return Err(CliError::Verification(format!("{failed} of {} criteria failed", ids.len())));
    }
    Ok(())
}
