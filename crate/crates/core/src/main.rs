use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use homfrac_core::fields::{self, parse_field, Field, LinComb};
use homfrac_core::fracop::{self, Engine};
use homfrac_core::group::{validate_spec, RawGroupSpec};
use homfrac_core::quadrature::{self, QuadratureConfig};
use homfrac_core::report::{self, Profile};
use homfrac_core::sobolev::{self, GridField, GridOperator, GridOptions, OptimizeOptions};
use homfrac_core::{CoordBox, Error, Gauge, GaugeKind, GroupSpec, Point, Result};

#[derive(Parser)]
#[command(name = "homfrac", version, about = "Fractional operators and Sobolev constants on homogeneous groups")]
struct Cli {
    /// Worker threads (default: hardware count).
    #[arg(long, env = "HOMFRAC_THREADS", global = true)]
    threads: Option<usize>,
    /// Write the main artifact here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Setup {
    /// Built-in selector (`heisenberg:1`, `euclidean:2`, `parabolic_r2`) or a JSON group file.
    #[arg(long, default_value = "heisenberg:1")]
    group: String,
    /// `koranyi`, `ball_gauge:R`, `parabolic`, `euclidean_power`, `max`.
    #[arg(long, default_value = "koranyi")]
    gauge: String,
    #[arg(long, default_value_t = 200_000)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

impl Setup {
    fn load(&self) -> Result<(GroupSpec, Gauge, QuadratureConfig)> {
        let spec = GroupSpec::parse_selector(&self.group)?;
        let gauge = Gauge::new(GaugeKind::parse(&self.gauge)?, &spec)?;
        let cfg = QuadratureConfig { n_samples: self.samples, seed: self.seed, ..Default::default() };
        cfg.validate()?;
        Ok((spec, gauge, cfg))
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate a group description (exit 2 on failure).
    Validate {
        #[arg(long)]
        group: String,
    },
    /// Sample the gauge axioms.
    GaugeCheck {
        #[command(flatten)]
        setup: Setup,
    },
    /// Q, m, |B_1|, σ_Q and τ_m with their dual estimators.
    Constants {
        #[command(flatten)]
        setup: Setup,
    },
    /// ℒ_s u at a list of points (CSV).
    Fracop {
        #[command(flatten)]
        setup: Setup,
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        #[arg(long, default_value = "compact_bump:R=1")]
        field: String,
        /// CSV file of points, one per row.
        #[arg(long)]
        points: Option<PathBuf>,
        /// A single point `x1,x2,..`; repeatable.
        #[arg(long, allow_hyphen_values = true)]
        point: Vec<String>,
    },
    /// Normalized operator and seminorm values near s = 0 and s = 1 (CSV).
    Limits {
        #[command(flatten)]
        setup: Setup,
        #[arg(long, default_value = "compact_bump:R=1")]
        field: String,
        #[arg(long, default_value = "0.02,0.98", value_delimiter = ',')]
        s_grid: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        point: Vec<String>,
    },
    /// The Gagliardo seminorm (JSON).
    Seminorm {
        #[command(flatten)]
        setup: Setup,
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        #[arg(long, default_value = "compact_bump:R=1")]
        field: String,
    },
    /// The Dirichlet form against the pairing with ℒ_s (JSON).
    Dirichlet {
        #[command(flatten)]
        setup: Setup,
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        #[arg(long, default_value = "compact_bump:R=1")]
        field: String,
        #[arg(long, default_value = "gaussian")]
        field2: String,
    },
    /// Far-field decay against its bound (CSV).
    Decay {
        #[command(flatten)]
        setup: Setup,
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        #[arg(long, default_value = "compact_bump:R=1")]
        field: String,
        /// Radii as multiples of the support radius.
        #[arg(long, default_value = "2,4,8", value_delimiter = ',')]
        multiples: Vec<f64>,
    },
    /// ‖R_h u − u‖₂/(|h|^s[u]) over dyadic |h| (CSV).
    Transdiff {
        #[command(flatten)]
        setup: Setup,
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        #[arg(long, default_value = "compact_bump:R=1")]
        field: String,
        /// Direction of h, normalized to gauge 1.
        #[arg(long, allow_hyphen_values = true)]
        dir: Option<String>,
        #[arg(long, default_value_t = 6)]
        levels: i32,
    },
    /// Minimize the discrete Sobolev quotient (trace CSV and an HFG1 field dump).
    SobolevOpt {
        #[command(flatten)]
        setup: Setup,
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        /// Nodes per axis.
        #[arg(long, default_value_t = 16)]
        grid: usize,
        /// Half-width of the box along the first-layer axes.
        #[arg(long = "box", default_value_t = 6.0)]
        half_width: f64,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, default_value = "compact_bump:R=3")]
        init: String,
        #[arg(long, default_value = "extremal.hfg1")]
        dump: PathBuf,
    },
    /// The Hedberg constant and embedding factor (JSON).
    Hedberg {
        #[arg(long = "Q")]
        q: f64,
        #[arg(long)]
        s: f64,
        /// σ_Q; defaults to 1, which leaves only the bracket terms.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
    },
    /// Mollified and truncated seminorms (JSON).
    MollifyCheck {
        #[command(flatten)]
        setup: Setup,
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        #[arg(long, default_value = "compact_bump:R=1")]
        field: String,
        #[arg(long, default_value = "0.5,0.25,0.125", value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 4)]
        nodes: usize,
        #[arg(long, default_value = "4,8,16", value_delimiter = ',')]
        radii: Vec<f64>,
    },
    /// Projection defect over a tiling by Max-gauge balls (JSON).
    Rellich {
        #[arg(long, default_value = "heisenberg:1")]
        group: String,
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        #[arg(long, default_value = "compact_bump:R=1")]
        field: String,
        #[arg(long, default_value = "0.4,0.2,0.1", value_delimiter = ',')]
        delta: Vec<f64>,
        /// Half-widths of the centered box Ω; defaults to 1 on every axis.
        #[arg(long, value_delimiter = ',')]
        omega: Vec<f64>,
        #[arg(long, default_value_t = 4)]
        nodes: usize,
    },
    /// The translation ratio r(k, η) on the line (CSV).
    Counterexample {
        #[arg(long, default_value = "1,4,16,64,256", value_delimiter = ',')]
        k: Vec<f64>,
        #[arg(long, default_value = "0.1,0.01,0.001", value_delimiter = ',')]
        eta: Vec<f64>,
    },
    /// Run the acceptance suite (JSON; exit 1 if a criterion fails).
    Report {
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Subset of criteria; all by default.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u32>,
    },
}

fn parse_point(s: &str, dim: usize) -> Result<Point> {
    let v: std::result::Result<Vec<f64>, _> = s.split(',').map(|x| x.trim().parse::<f64>()).collect();
    let v = v.map_err(|_| Error::Config(format!("bad point `{}`", s)))?;
    if v.len() != dim {
        return Err(Error::Config(format!("point `{}` has {} coordinates, group has {}", s, v.len(), dim)));
    }
    Ok(v.into_iter().collect())
}

fn read_points(path: &PathBuf, dim: usize) -> Result<Vec<Point>> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::Config(e.to_string()))?;
        // a header row is skipped
        if rec.iter().any(|c| c.parse::<f64>().is_err()) && out.is_empty() {
            continue;
        }
        out.push(parse_point(&rec.iter().collect::<Vec<_>>().join(","), dim)?);
    }
    Ok(out)
}

fn points_or_identity(raw: &[String], spec: &GroupSpec) -> Result<Vec<Point>> {
    if raw.is_empty() {
        return Ok(vec![spec.identity()]);
    }
    raw.iter().map(|p| parse_point(p, spec.dim())).collect()
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json<T: Serialize>(out: &Option<PathBuf>, v: &T) -> Result<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    Ok(())
}

fn csv_writer(out: &Option<PathBuf>) -> Result<csv::Writer<Box<dyn Write>>> {
    Ok(csv::Writer::from_writer(sink(out)?))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn coords(x: &[f64]) -> String {
    x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn run(cli: Cli) -> Result<ExitCode> {
    let out = cli.output.clone();
    match cli.cmd {
        Cmd::Validate { group } => {
            let text = std::fs::read_to_string(&group).map_err(|e| Error::Config(format!("{}: {}", group, e)))?;
            let raw: RawGroupSpec = serde_json::from_str(&text)?;
            let rep = validate_spec(&raw);
            emit_json(&out, &rep)?;
            if !rep.passed() {
                eprintln!("error: {}", rep.summary());
                return Ok(ExitCode::from(2));
            }
        }
        Cmd::GaugeCheck { setup } => {
            let (spec, gauge, cfg) = setup.load()?;
            emit_json(&out, &homfrac_core::gauge::check_gauge_properties(&gauge, &spec, cfg.n_samples, cfg.seed))?;
        }
        Cmd::Constants { setup } => {
            let (spec, gauge, cfg) = setup.load()?;
            let vol = quadrature::unit_ball_volume(&gauge, &cfg);
            let sigma = quadrature::sigma_q(&spec, &gauge, &cfg)?;
            let sigma_ext = quadrature::sigma_q_exterior(&spec, &gauge, 0.5, &cfg)?;
            let tau = quadrature::tau_m(&spec, &gauge, &cfg)?;
            let tau_hat = quadrature::tau_hat(&spec, &gauge, &cfg)?;
            let s = 0.5;
            let mut diag = homfrac_core::Estimate::exact(0.0);
            for i in spec.horizontal() {
                diag = diag.plus(&quadrature::moment_integral(&spec, &gauge, i, i, s, &cfg)?);
            }
            let tau_moments = diag.scale(2.0 * (1.0 - s));
            emit_json(
                &out,
                &json!({
                    "group": spec.name(), "gauge": gauge.label(), "Q": spec.q(), "m": spec.m(),
                    "vol_B1": vol, "sigma_Q": sigma, "tau_m": tau, "tau_hat_sq": tau_hat,
                    "cross_checks": {
                        "sigma_q_exterior": sigma_ext, "sigma_agree": sigma.agrees(&sigma_ext, 2.0),
                        "tau_m_from_moments": tau_moments, "tau_agree": tau.agrees(&tau_moments, 2.0),
                    },
                }),
            )?;
        }
        Cmd::Fracop { setup, s, field, points, point } => {
            let (spec, gauge, cfg) = setup.load()?;
            let u = parse_field(&field, &spec)?;
            let mut pts = match &points {
                Some(p) => read_points(p, spec.dim())?,
                None => Vec::new(),
            };
            pts.extend(point.iter().map(|p| parse_point(p, spec.dim())).collect::<Result<Vec<_>>>()?);
            if pts.is_empty() {
                pts.push(spec.identity());
            }
            let eng = Engine::new(&spec, &gauge, &cfg)?;
            let p = eng.params(s)?;
            let mut w = csv_writer(&out)?;
            w.write_record(["point", "value", "std_err", "tail_bound"]).map_err(csv_err)?;
            for g in &pts {
                let e = eng.eval_ls(&p, u.as_ref(), g)?;
                w.serialize((coords(g), e.value, e.std_err, e.tail_bound)).map_err(csv_err)?;
            }
            w.flush()?;
        }
        Cmd::Limits { setup, field, s_grid, point } => {
            let (spec, gauge, cfg) = setup.load()?;
            let u = parse_field(&field, &spec)?;
            let pts = points_or_identity(&point, &spec)?;
            let rows = fracop::limit_probe(&spec, &gauge, u.as_ref(), &pts, &s_grid, &cfg)?;
            let mut w = csv_writer(&out)?;
            w.write_record(["kind", "s", "point", "normalized_value", "std_err", "target", "rel_err"]).map_err(csv_err)?;
            for r in rows {
                w.serialize((r.kind, r.s, coords(&r.point), r.normalized_value, r.std_err, r.target, r.rel_err))
                    .map_err(csv_err)?;
            }
            w.flush()?;
        }
        Cmd::Seminorm { setup, s, field } => {
            let (spec, gauge, cfg) = setup.load()?;
            let u = parse_field(&field, &spec)?;
            let eng = Engine::new(&spec, &gauge, &cfg)?;
            let p = eng.params(s)?;
            let sq = eng.seminorm_sq(&p, u.as_ref())?;
            let semi = fracop::sqrt_estimate(&sq);
            emit_json(&out, &json!({ "field": u.describe(), "s": s, "seminorm_sq": sq, "seminorm": semi }))?;
        }
        Cmd::Dirichlet { setup, s, field, field2 } => {
            let (spec, gauge, cfg) = setup.load()?;
            let u = parse_field(&field, &spec)?;
            let v = parse_field(&field2, &spec)?;
            let eng = Engine::new(&spec, &gauge, &cfg)?;
            let p = eng.params(s)?;
            let form = eng.dirichlet_form(&p, u.as_ref(), v.as_ref())?;
            let pair = eng.pairing(&p, v.as_ref(), u.as_ref())?;
            let diff = form.minus(&pair);
            emit_json(&out, &json!({ "s": s, "u": u.describe(), "v": v.describe(), "form": form, "pairing": pair, "difference": diff }))?;
        }
        Cmd::Decay { setup, s, field, multiples } => {
            let (spec, gauge, cfg) = setup.load()?;
            let u = parse_field(&field, &spec)?;
            let r = fields::support_radius(u.as_ref(), &gauge)
                .ok_or_else(|| Error::Config(format!("{} is not compactly supported", u.describe())))?;
            let eng = Engine::new(&spec, &gauge, &cfg)?;
            let p = eng.params(s)?;
            let radii: Vec<f64> = multiples.iter().map(|m| m * r).collect();
            let (_, rows) = fracop::decay_profile(&eng, &p, u.as_ref(), &radii)?;
            let mut w = csv_writer(&out)?;
            w.write_record(["radius", "point", "value", "std_err", "tail_bound", "scaled", "bound", "direct"]).map_err(csv_err)?;
            for d in rows {
                w.serialize((d.radius, coords(&d.point), d.value.value, d.value.std_err, d.value.tail_bound, d.scaled, d.bound, d.direct))
                    .map_err(csv_err)?;
            }
            w.flush()?;
        }
        Cmd::Transdiff { setup, s, field, dir, levels } => {
            let (spec, gauge, cfg) = setup.load()?;
            let u = parse_field(&field, &spec)?;
            let dir = match dir {
                Some(d) => parse_point(&d, spec.dim())?,
                None => vec![1.0; spec.dim()].into_iter().collect(),
            };
            let n = gauge.eval(&dir);
            if !(n > 0.0) {
                return Err(Error::Config("direction must be nonzero".into()));
            }
            let dir = spec.dilate(1.0 / n, &dir);
            let eng = Engine::new(&spec, &gauge, &cfg)?;
            let p = eng.params(s)?;
            let semi = eng.seminorm(&p, u.as_ref())?;
            let mut w = csv_writer(&out)?;
            w.write_record(["h_norm", "l2_diff", "l2_diff_std_err", "ratio", "ratio_std_err", "ratio_tail_bound"]).map_err(csv_err)?;
            for j in 0..levels.max(1) {
                let h = spec.dilate(2f64.powi(-j), &dir);
                let t = eng.translation_difference(&p, u.as_ref(), &h, &semi)?;
                w.serialize((t.h_norm, t.l2_diff.value, t.l2_diff.std_err, t.ratio.value, t.ratio.std_err, t.ratio.tail_bound))
                    .map_err(csv_err)?;
            }
            w.flush()?;
        }
        Cmd::SobolevOpt { setup, s, grid, half_width, iters, init, dump } => {
            let (spec, gauge, cfg) = setup.load()?;
            if grid < 3 {
                return Err(Error::Config("grid needs at least 3 nodes per axis".into()));
            }
            let p = homfrac_core::fracop::FracParams::new(&spec, s)?;
            sobolev::critical_exponent(spec.q(), s)?;
            let sigma = quadrature::sigma_q(&spec, &gauge, &cfg)?;
            let u0 = parse_field(&init, &spec)?;
            let start = GridField::sample(&gauge, half_width, &vec![grid; spec.dim()], u0.as_ref())?;
            let opts = GridOptions { exterior_samples: 16_384, seed: cfg.seed, ..Default::default() };
            let op = GridOperator::new(&spec, &gauge, &p, &start, sigma.value, &opts)?;
            let res = sobolev::optimize_quotient(&op, &start, &OptimizeOptions { iters, ..Default::default() })?;
            let mut f = BufWriter::new(File::create(&dump)?);
            sobolev::write_hfg1(&mut f, &res.field)?;
            f.flush()?;
            let mut w = csv_writer(&out)?;
            w.write_record(["iteration", "quotient", "seminorm_sq", "lp_norm", "step_size"]).map_err(csv_err)?;
            for t in &res.trace {
                w.serialize((t.iteration, t.quotient, t.seminorm_sq, t.lp_norm, t.step_size)).map_err(csv_err)?;
            }
            w.flush()?;
            eprintln!(
                "final quotient {:.6} residual {:.3e} ({} iterations, sigma_Q {:.5} ± {:.1e}); field written to {}",
                res.trace.last().map(|t| t.quotient).unwrap_or(f64::NAN),
                res.residual,
                res.trace.len() - 1,
                sigma.value,
                sigma.std_err,
                dump.display()
            );
        }
        Cmd::Hedberg { q, s, sigma } => {
            emit_json(&out, &sobolev::hedberg_report(q, s, sigma)?)?;
        }
        Cmd::MollifyCheck { setup, s, field, eps, nodes, radii } => {
            let (spec, gauge, cfg) = setup.load()?;
            let u = parse_field(&field, &spec)?;
            let eng = Engine::new(&spec, &gauge, &cfg)?;
            let p = eng.params(s)?;
            let rho = sobolev::standard_mollifier(&spec)?;
            let base = eng.seminorm(&p, u.as_ref())?;
            let mut moll = Vec::new();
            for e in eps {
                let ue: Field = Arc::new(sobolev::mollify(&spec, rho.as_ref(), e, u.clone(), nodes)?);
                let se = eng.seminorm(&p, ue.as_ref())?;
                let d = LinComb::new(vec![(1.0, ue), (-1.0, u.clone())]);
                let sd = eng.seminorm(&p, &d)?;
                moll.push(json!({ "eps": e, "seminorm": se, "ratio": se.value / base.value, "diff_seminorm": sd }));
            }
            let mut trunc = Vec::new();
            for r in radii {
                let phi = sobolev::truncation_field(&gauge, r)?;
                let lip = sobolev::lipschitz_probe(&spec, &phi, 10_000, cfg.seed);
                let pu = homfrac_core::fields::Product::new(Arc::new(phi), u.clone());
                trunc.push(json!({ "R": r, "seminorm": eng.seminorm(&p, &pu)?, "lipschitz_probe": lip }));
            }
            emit_json(&out, &json!({ "field": u.describe(), "s": s, "seminorm": base, "mollified": moll, "truncated": trunc }))?;
        }
        Cmd::Rellich { group, s, field, delta, omega, nodes } => {
            let spec = GroupSpec::parse_selector(&group)?;
            let gauge = Gauge::new(GaugeKind::Max, &spec)?;
            let u = parse_field(&field, &spec)?;
            let half = if omega.is_empty() { vec![1.0; spec.dim()] } else { omega };
            if half.len() != spec.dim() {
                return Err(Error::Config("omega needs one half-width per coordinate".into()));
            }
            let om = CoordBox::centered(&half);
            let mut rows = Vec::new();
            for d in &delta {
                let balls = sobolev::max_gauge_tiling(&spec, &gauge, *d, &om)?;
                rows.push(sobolev::rellich_defect(&spec, &gauge, u.as_ref(), &balls, &om, nodes)?);
            }
            let ds: Vec<f64> = rows.iter().map(|r| r.delta).collect();
            let vs: Vec<f64> = rows.iter().map(|r| r.defect.value).collect();
            let slope = if rows.len() >= 2 { fields::loglog_slope(&ds, &vs) } else { f64::NAN };
            emit_json(&out, &json!({ "field": u.describe(), "s": s, "omega": half, "rows": rows, "slope": slope, "threshold": 2.0 * s - 0.2 }))?;
        }
        Cmd::Counterexample { k, eta } => {
            let rows = sobolev::counterexample_sweep(&fields::bump1d, 1.0, &k, &eta)?;
            let mut w = csv_writer(&out)?;
            for r in rows {
                w.serialize(r).map_err(csv_err)?;
            }
            w.flush()?;
        }
        Cmd::Report { quick, seed, criteria } => {
            let prof = if quick { Profile::quick(seed) } else { Profile::full(seed) };
            let ids: Vec<u32> = if criteria.is_empty() { (1..=16).collect() } else { criteria };
            let rep = report::run_report(&prof, &ids);
            emit_json(&out, &rep)?;
            for c in &rep.criteria {
                eprintln!("{:>2} {:<32} {} ({:.1}s)", c.id, c.title, if c.passed { "PASS" } else { "FAIL" }, c.seconds);
            }
            if !rep.passed {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        #[cfg(feature = "parallel")]
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {}", e);
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(2)
        }
    }
}
