use clap::{Args, Parser, Subcommand, ValueEnum};
use lorentz_besov::besov_norms::{besov_pq_norm, script_b_norm, tl_lorentz_norm, version_string, BesovParams, NormReport};
use lorentz_besov::counterexamples::{slope_sweep, write_slope_csv, BumpProfile, SlopeRow, VirtualFamily};
use lorentz_besov::differences::{difference_quasi_norm, NuGammaQuadrature};
use lorentz_besov::extensions::{
    bv_inequality_check, heat_fields, level_sweep, poisson_gradient, weak_norm_over_lambda_gamma, write_level_csv,
    BVFunction, Datum, ExtensionQuadrature, HalfSpaceMesh,
};
use lorentz_besov::harness::acceptance::{run as run_criterion, CRITERIA};
use lorentz_besov::harness::{embedding_sweep, equivalence_bracket, ExperimentPlan, Profile};
use lorentz_besov::littlewood_paley::build_phi;
use lorentz_besov::wavelets::{analyze, approx_space_norm, sampled_interpolant, sigma_curve, write_sigma_csv, WaveletBasis};
use lorentz_besov::{AnalyticField, Error, Exponent, Lattice, SampledFunction};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

const OUT_ENV: &str = "BESOV_LAB_OUT";
const DEFAULT_OUT: &str = "besov-lab-out";

#[derive(Parser, Debug)]
#[command(name = "besov-lab", version, about = "Lorentz-type Besov quasi-norms and related experiments")]
struct Cli {
    /// TOML file with default values for any flag (flags take precedence).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (falls back to the config, then $BESOV_LAB_OUT, then ./besov-lab-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Default, Clone)]
struct Num {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long = "grid-n")]
    grid_n: Option<usize>,
    #[arg(long = "box", allow_negative_numbers = true)]
    box_len: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    kmin: Option<i32>,
    #[arg(long, allow_negative_numbers = true)]
    kmax: Option<i32>,
    #[arg(long, allow_negative_numbers = true)]
    p: Option<f64>,
    /// Secondary Lorentz index; `inf` for weak type.
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    s: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long = "M")]
    order: Option<usize>,
    #[arg(long = "N")]
    n: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fourier-side quasi-norm of sampled data.
    Norm {
        #[command(flatten)]
        num: Num,
        /// scriptB, besov or tl.
        #[arg(long)]
        family: Option<String>,
        /// Samples, one `re,im` pair per line.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        inhomogeneous: bool,
    },
    /// Difference quasi-norm of sampled data or a built-in profile.
    DiffNorm {
        #[command(flatten)]
        num: Num,
        #[arg(long)]
        input: Option<PathBuf>,
        /// gaussian_carrier or cosine_gaussian.
        #[arg(long)]
        profile: Option<String>,
        #[arg(long = "shells-below")]
        shells_below: Option<i32>,
        #[arg(long = "shells-above")]
        shells_above: Option<i32>,
    },
    /// Difference against Fourier quasi-norm brackets over the standard family.
    Equiv {
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Embedding directions over the standard family.
    Embed {
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Growth of the lacunary counterexamples over N = 2..=N.
    Counterexample {
        #[command(flatten)]
        num: Num,
        /// Copy separation in profile units.
        #[arg(long)]
        separation: Option<f64>,
    },
    /// Wavelet coefficients, greedy errors and the approximation-space norm.
    Wavelet {
        #[command(flatten)]
        num: Num,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Vanishing moments of the Daubechies filter.
        #[arg(long)]
        moments: Option<usize>,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long = "n-max")]
        n_max: Option<usize>,
    },
    /// Weak-norm sweep of half-space extensions of an indicator function.
    Extend {
        #[command(flatten)]
        num: Num,
        /// poisson, heat-t or heat-x.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        a: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        b: Option<f64>,
    },
    /// The BV inequality for a step function.
    Bv {
        #[command(flatten)]
        num: Num,
        /// Comma separated jump positions.
        #[arg(long, allow_hyphen_values = true)]
        knots: Option<String>,
        /// Comma separated values, one more than the knots.
        #[arg(long, allow_hyphen_values = true)]
        values: Option<String>,
    },
    /// Runs the acceptance suite.
    Selftest {
        /// Restrict to these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: if e.is_convergence() { 2 } else { 1 }, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: 1, message: msg.into() }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Flag values, falling back to the config table and then to defaults.
struct Settings {
    config: toml::Table,
}

impl Settings {
    fn load(path: Option<&Path>) -> Outcome<Self> {
        let config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                text.parse::<toml::Table>().map_err(|e| usage(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        Ok(Self { config })
    }

    fn f64(&self, flag: Option<f64>, key: &str, default: Option<f64>) -> Outcome<f64> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.config.get(key) {
            Some(toml::Value::Float(v)) => Ok(*v),
            Some(toml::Value::Integer(v)) => Ok(*v as f64),
            Some(other) => Err(usage(format!("config key `{key}` must be a number, got {other}"))),
            None => default.ok_or_else(|| usage(format!("missing --{key}"))),
        }
    }

    fn int(&self, flag: Option<i64>, key: &str, default: Option<i64>) -> Outcome<i64> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.config.get(key) {
            Some(toml::Value::Integer(v)) => Ok(*v),
            Some(other) => Err(usage(format!("config key `{key}` must be an integer, got {other}"))),
            None => default.ok_or_else(|| usage(format!("missing --{key}"))),
        }
    }

    fn string(&self, flag: Option<&str>, key: &str) -> Option<String> {
        if let Some(v) = flag {
            return Some(v.to_string());
        }
        match self.config.get(key) {
            Some(toml::Value::String(s)) => Some(s.clone()),
            Some(toml::Value::Float(v)) => Some(v.to_string()),
            Some(toml::Value::Integer(v)) => Some(v.to_string()),
            _ => None,
        }
    }

    fn exponent(&self, flag: Option<&str>, key: &str, default: Exponent) -> Outcome<Exponent> {
        match self.string(flag, key) {
            Some(s) => s.parse::<Exponent>().map_err(|e| usage(format!("--{key}: {e}"))),
            None => Ok(default),
        }
    }

    fn path(&self, flag: Option<&PathBuf>, key: &str) -> Option<PathBuf> {
        flag.cloned().or_else(|| self.string(None, key).map(PathBuf::from))
    }
}

struct Context {
    settings: Settings,
    out: PathBuf,
    format: Option<Format>,
}

impl Context {
    fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    fn file(&self, name: &str) -> Outcome<PathBuf> {
        std::fs::create_dir_all(&self.out)?;
        Ok(self.out.join(name))
    }

    fn emit_json(&self, name: &str, value: &serde_json::Value) -> Outcome<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| usage(e.to_string()))?;
        std::fs::write(self.file(name)?, format!("{text}\n"))?;
        println!("{text}");
        Ok(())
    }

    fn emit_report(&self, stem: &str, report: &NormReport) -> Outcome<()> {
        match self.format_or(Format::Json) {
            Format::Json => self.emit_json(&format!("{stem}.json"), &serde_json::to_value(report).map_err(Error::from)?),
            Format::Csv => {
                let path = self.file(&format!("{stem}.csv"))?;
                let body = format!(
                    "family,value,s,p,r,q,gamma,n,L,kmin,kmax,label,version\n{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    report.family.tag(),
                    report.value,
                    report.s,
                    report.p,
                    report.r,
                    report.q,
                    report.gamma,
                    report.n,
                    report.box_len,
                    report.kmin,
                    report.kmax,
                    report.label,
                    report.version
                );
                std::fs::write(&path, &body)?;
                print!("{body}");
                Ok(())
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("besov-lab: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome<u8> {
    let settings = Settings::load(cli.config.as_deref())?;
    let threads = match cli.threads {
        Some(t) => Some(t as i64),
        None => settings.int(None, "threads", None).ok(),
    };
    if let Some(t) = threads {
        if t < 1 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t as usize).build_global().map_err(|e| usage(e.to_string()))?;
    }
    let out = settings
        .path(cli.out.as_ref(), "out")
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let format = match cli.format {
        Some(f) => Some(f),
        None => match settings.string(None, "format").as_deref() {
            None => None,
            Some("json") => Some(Format::Json),
            Some("csv") => Some(Format::Csv),
            Some(other) => return Err(usage(format!("unknown format `{other}`"))),
        },
    };
    let ctx = Context { settings, out, format };
    match cli.command {
        Command::Norm { num, family, input, inhomogeneous } => norm(&ctx, &num, family, input, inhomogeneous),
        Command::DiffNorm { num, input, profile, shells_below, shells_above } => {
            diff_norm(&ctx, &num, input, profile, shells_below, shells_above)
        }
        Command::Equiv { plan, seed } => equiv(&ctx, plan, seed),
        Command::Embed { plan, seed } => embed(&ctx, plan, seed),
        Command::Counterexample { num, separation } => counterexample(&ctx, &num, separation),
        Command::Wavelet { num, input, alpha, moments, levels, n_max } => {
            wavelet(&ctx, &num, input, alpha, moments, levels, n_max)
        }
        Command::Extend { num, kind, a, b } => extend(&ctx, &num, kind, a, b),
        Command::Bv { num, knots, values } => bv(&ctx, &num, knots, values),
        Command::Selftest { only } => selftest(&ctx, only),
    }
}

fn parse_list(text: &str, what: &str) -> Outcome<Vec<f64>> {
    text.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| usage(format!("--{what}: `{t}` is not a number"))))
        .collect()
}

/// Input samples with their lattice.
fn load_input(ctx: &Context, num: &Num, input: Option<PathBuf>) -> Outcome<SampledFunction> {
    let st = &ctx.settings;
    let path = st.path(input.as_ref(), "input").ok_or_else(|| usage("missing --input"))?;
    let dim = st.int(num.dim.map(|v| v as i64), "dim", Some(1))? as usize;
    let box_len = st.f64(num.box_len, "box", None)?;
    let f = SampledFunction::load_columns(&path, dim, box_len).map_err(|e| match e {
        Error::NonFinite(_) => usage(format!("{}: {e}", path.display())),
        other => Failure::from(other),
    })?;
    if let Some(n) = st.int(num.grid_n.map(|v| v as i64), "grid_n", None).ok() {
        if n as usize != f.lattice.n {
            return Err(usage(format!("--grid-n {n} does not match the {} samples per axis in the input", f.lattice.n)));
        }
    }
    Ok(f)
}

/// Bands from the lowest nonzero lattice frequency up to the Nyquist limit.
fn default_bands(lattice: &Lattice) -> (i32, i32) {
    let lo = (2.0 * std::f64::consts::PI / lattice.box_len / 0.875).log2().ceil() as i32;
    let hi = (lattice.nyquist() / 1.75).log2().floor() as i32;
    (lo, hi.max(lo))
}

fn norm(ctx: &Context, num: &Num, family: Option<String>, input: Option<PathBuf>, inhomogeneous: bool) -> Outcome<u8> {
    let st = &ctx.settings;
    let f = load_input(ctx, num, input)?;
    let (lo, hi) = default_bands(&f.lattice);
    let kmin = st.int(num.kmin.map(i64::from), "kmin", Some(lo as i64))? as i32;
    let kmax = st.int(num.kmax.map(i64::from), "kmax", Some(hi as i64))? as i32;
    let s = st.f64(num.s, "s", Some(0.5))?;
    let p = st.f64(num.p, "p", Some(2.0))?;
    let r = st.exponent(num.r.as_deref(), "r", Exponent::INFINITY)?;
    let gamma = st.f64(num.gamma, "gamma", Some(1.0))?;
    let mut params = BesovParams::new(s, p, r, gamma)?;
    if let Some(q) = st.string(num.q.as_deref(), "q") {
        params = params.with_q(q.parse::<Exponent>().map_err(|e| usage(format!("--q: {e}")))?)?;
    }
    if inhomogeneous || matches!(st.config.get("inhomogeneous"), Some(toml::Value::Boolean(true))) {
        params = params.inhomogeneous();
    }
    let fam = build_phi(kmin, kmax)?;
    let family = st.string(family.as_deref(), "family").unwrap_or_else(|| "scriptB".into());
    let mut report = match family.as_str() {
        "scriptB" | "script_b" => script_b_norm(&f, &params, &fam)?,
        "besov" => besov_pq_norm(&f, &params, &fam)?,
        "tl" | "triebel_lizorkin" => tl_lorentz_norm(&f, &params, &fam)?,
        other => return Err(usage(format!("unknown family `{other}` (scriptB, besov, tl)"))),
    };
    report.seed = st.int(num.seed.map(|v| v as i64), "seed", Some(0))? as u64;
    ctx.emit_report("norm", &report)?;
    Ok(0)
}

fn diff_norm(
    ctx: &Context,
    num: &Num,
    input: Option<PathBuf>,
    profile: Option<String>,
    below: Option<i32>,
    above: Option<i32>,
) -> Outcome<u8> {
    let st = &ctx.settings;
    let field: AnalyticField = match st.string(profile.as_deref(), "profile") {
        Some(name) => match name.as_str() {
            "gaussian_carrier" => Profile::GaussianCarrier.field(),
            "cosine_gaussian" => Profile::CosineGaussian.field(),
            other => return Err(usage(format!("unknown profile `{other}` (gaussian_carrier, cosine_gaussian)"))),
        },
        None => {
            let f = load_input(ctx, num, input)?;
            if f.lattice.dim != 1 {
                return Err(usage("sampled input for diff-norm must be one-dimensional"));
            }
            let half = 0.5 * f.lattice.box_len;
            sampled_interpolant(&f, 0.0, half, f.lattice.nyquist())?
        }
    };
    let order = st.int(num.order.map(|v| v as i64), "M", Some(1))? as usize;
    let s = st.f64(num.s, "s", Some(0.5))?;
    let p = st.f64(num.p, "p", Some(2.0))?;
    let r = st.exponent(num.r.as_deref(), "r", Exponent::INFINITY)?;
    let gamma = st.f64(num.gamma, "gamma", Some(1.0))?;
    if !(s > 0.0 && s < order as f64) {
        return Err(usage(format!("s = {s} must lie in (0, M) with M = {order}")));
    }
    let below = st.int(below.map(i64::from), "shells_below", Some(24))? as i32;
    let above = st.int(above.map(i64::from), "shells_above", Some(24))? as i32;
    let quad = NuGammaQuadrature::for_field(&field, order, below, above)?;
    let mut report = difference_quasi_norm(&field, order, s + gamma / p, gamma, p, r, &quad)?;
    report.seed = st.int(num.seed.map(|v| v as i64), "seed", Some(0))? as u64;
    ctx.emit_report("diff_norm", &report)?;
    Ok(0)
}

fn load_plan(ctx: &Context, plan: Option<PathBuf>, seed: Option<u64>, fallback: ExperimentPlan) -> Outcome<ExperimentPlan> {
    let mut plan = match ctx.settings.path(plan.as_ref(), "plan") {
        Some(p) => ExperimentPlan::load(&p)?,
        None => fallback,
    };
    if let Ok(seed) = ctx.settings.int(seed.map(|v| v as i64), "seed", None) {
        plan.seeds = vec![seed as u64];
    }
    plan.validate()?;
    Ok(plan)
}

fn equiv(ctx: &Context, plan: Option<PathBuf>, seed: Option<u64>) -> Outcome<u8> {
    let plan = load_plan(ctx, plan, seed, ExperimentPlan::standard_equivalence())?;
    let table = equivalence_bracket(&plan)?;
    match ctx.format_or(Format::Csv) {
        Format::Csv => table.write_csv(&ctx.file("equivalence.csv")?)?,
        Format::Json => std::fs::write(ctx.file("equivalence.json")?, table.to_json()?)?,
    }
    let dr = table.rows.iter().map(|r| r.dynamic_range).fold(0.0, f64::max);
    let mesh = table.rows.iter().map(|r| r.mesh_drift).fold(0.0, f64::max);
    println!(
        "{}",
        json!({"grid_points": table.rows.len(), "functions": table.members.len(), "max_dynamic_range": dr, "max_mesh_drift": mesh})
    );
    Ok(0)
}

fn embed(ctx: &Context, plan: Option<PathBuf>, seed: Option<u64>) -> Outcome<u8> {
    let plan = load_plan(ctx, plan, seed, ExperimentPlan::standard_embedding())?;
    let rep = embedding_sweep(&plan)?;
    match ctx.format_or(Format::Csv) {
        Format::Csv => rep.write_csv(&ctx.file("embedding.csv")?)?,
        Format::Json => std::fs::write(ctx.file("embedding.json")?, rep.to_json()?)?,
    }
    println!(
        "{}",
        json!({"checks": rep.rows.len(), "violations": rep.total_violations, "collapse_deviation": rep.collapse_deviation, "witness_growth": rep.witness_growth})
    );
    Ok(0)
}

fn counterexample(ctx: &Context, num: &Num, separation: Option<f64>) -> Outcome<u8> {
    let st = &ctx.settings;
    let gamma = st.f64(num.gamma, "gamma", Some(0.5))?;
    let s = st.f64(num.s, "s", Some(0.5))?;
    let p = st.f64(num.p, "p", Some(2.0))?;
    let r = st.exponent(num.r.as_deref(), "r", Exponent::from(4.0))?;
    let n_max = st.int(num.n.map(i64::from), "N", Some(8))?;
    let sep = st.f64(separation, "separation", Some(16.0))?;
    if n_max < 3 {
        return Err(usage("--N must be at least 3 so that the sweep 2..=N has two points"));
    }
    if r.is_infinite() {
        return Err(usage("--r must be finite; the weak-type row is always included"));
    }
    let ns: Vec<u32> = (2..=n_max as u32).collect();
    let eta = Arc::new(BumpProfile::annulus()?);
    let rv = r.value();
    let families = [
        (VirtualFamily::ScriptB { beta: gamma }, Exponent::INFINITY, 1.0 / p),
        (VirtualFamily::ScriptB { beta: gamma + 1.0 }, r, 1.0 / rv),
        (VirtualFamily::Besov { q: r }, Exponent::from(p), 1.0 / rv),
    ];
    let mut rows: Vec<SlopeRow> = Vec::new();
    let mut slopes = Vec::new();
    for (family, rr, target) in families {
        let (mut part, slope) = slope_sweep(gamma, s, p, rr, &ns, sep, family, target, eta.clone())?;
        slopes.push(json!({"family": part[0].family, "slope": slope, "target": target}));
        rows.append(&mut part);
    }
    match ctx.format_or(Format::Csv) {
        Format::Csv => write_slope_csv(&rows, &ctx.file("counterexample.csv")?)?,
        Format::Json => std::fs::write(
            ctx.file("counterexample.json")?,
            serde_json::to_string_pretty(&rows).map_err(Error::from)?,
        )?,
    }
    println!("{}", json!({"gamma": gamma, "s": s, "p": p, "r": rv, "slopes": slopes}));
    Ok(0)
}

fn wavelet(
    ctx: &Context,
    num: &Num,
    input: Option<PathBuf>,
    alpha: Option<f64>,
    moments: Option<usize>,
    levels: Option<usize>,
    n_max: Option<usize>,
) -> Outcome<u8> {
    let st = &ctx.settings;
    let f = load_input(ctx, num, input)?;
    let q = st.exponent(num.q.as_deref(), "q", Exponent::from(2.0))?;
    if q.is_infinite() {
        return Err(usage("--q must be finite"));
    }
    let alpha = st.f64(alpha, "alpha", Some(0.3))?;
    let u = st.int(moments.map(|v| v as i64), "moments", Some(4))? as usize;
    let basis = WaveletBasis::daubechies(u)?;
    let max_levels = (f.lattice.n / basis.lowpass.len()).max(1).ilog2() as usize;
    let levels = st.int(levels.map(|v| v as i64), "levels", Some(max_levels as i64))? as usize;
    let n_max = st.int(n_max.map(|v| v as i64), "n_max", Some(1024))? as usize;
    let tree = analyze(&f, &basis, levels)?;
    tree.write_json(&ctx.file("coefficients.json")?)?;
    let curve = sigma_curve(&tree, q.value(), n_max);
    write_sigma_csv(&curve, &ctx.file("sigma_n.csv")?)?;
    let (norm, used) = approx_space_norm(&tree, q.value(), alpha, Exponent::INFINITY, n_max);
    ctx.emit_json(
        "wavelet.json",
        &json!({"q": q.value(), "alpha": alpha, "moments": u, "levels": levels, "n_max": used, "approx_norm": norm, "version": version_string()}),
    )?;
    Ok(0)
}

fn extend(ctx: &Context, num: &Num, kind: Option<String>, a: Option<f64>, b: Option<f64>) -> Outcome<u8> {
    let st = &ctx.settings;
    let kind = st.string(kind.as_deref(), "kind").unwrap_or_else(|| "poisson".into());
    let a = st.f64(a, "a", Some(0.0))?;
    let b = st.f64(b, "b", Some(1.0))?;
    let gamma = st.f64(num.gamma, "gamma", Some(1.0))?;
    let default_p = match kind.as_str() {
        "poisson" => 2.0,
        "heat-t" => 1.5,
        "heat-x" => 3.0,
        other => return Err(usage(format!("unknown kind `{other}` (poisson, heat-t, heat-x)"))),
    };
    let p = st.f64(num.p, "p", Some(default_p))?;
    let f = Datum::Bv(BVFunction::indicator(a, b, 1.0)?);
    let mesh = HalfSpaceMesh::graded(&[a, b], a - 20.0, b + 20.0, 1e-13, 1e-11, 1e2, 1.05)?;
    let q = ExtensionQuadrature::default();
    let field = match kind.as_str() {
        "poisson" => poisson_gradient(&f, &mesh, &q)?,
        "heat-t" => heat_fields(&f, &mesh, 1.0, &q)?.component(1)?,
        _ => heat_fields(&f, &mesh, 1.0, &q)?.component(0)?.t_weighted(0.5),
    };
    let lambdas: Vec<f64> = (0..=24).map(|i| 10f64.powf(1.0 + i as f64 / 8.0)).collect();
    let sweep = level_sweep(&field, p, gamma, &lambdas);
    write_level_csv(&sweep, &ctx.file(&format!("extend_{kind}.csv"))?)?;
    let weak = weak_norm_over_lambda_gamma(&field, p, gamma);
    println!("{}", json!({"kind": kind, "p": p, "gamma": gamma, "weak_norm": weak, "levels": sweep.len()}));
    Ok(0)
}

fn bv(ctx: &Context, num: &Num, knots: Option<String>, values: Option<String>) -> Outcome<u8> {
    let st = &ctx.settings;
    let knots = parse_list(&st.string(knots.as_deref(), "knots").unwrap_or_else(|| "0,1".into()), "knots")?;
    let values = parse_list(&st.string(values.as_deref(), "values").unwrap_or_else(|| "0,1,0".into()), "values")?;
    let p = st.f64(num.p, "p", Some(2.0))?;
    let gamma = st.f64(num.gamma, "gamma", Some(1.0))?;
    let f = BVFunction::step(knots, values)?;
    let report = bv_inequality_check(&f, p, gamma)?;
    ctx.emit_json("bv.json", &serde_json::to_value(report).map_err(Error::from)?)?;
    Ok(0)
}

fn selftest(ctx: &Context, only: Vec<u8>) -> Outcome<u8> {
    let ids: Vec<u8> = if only.is_empty() { CRITERIA.iter().map(|c| c.0).collect() } else { only };
    let mut results = Vec::new();
    for id in ids {
        let r = run_criterion(id)?;
        println!("{}", r.line());
        results.push(r);
    }
    std::fs::write(ctx.file("selftest.json")?, serde_json::to_string_pretty(&results).map_err(Error::from)?)?;
    Ok(if results.iter().all(|r| r.passed) { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(Failure::from(Error::NotConverged("x".into())).code, 2);
        assert_eq!(Failure::from(Error::NonFinite("x".into())).code, 2);
        assert_eq!(Failure::from(Error::InvalidParameter("x".into())).code, 1);
        assert_eq!(Failure::from(Error::Config("x".into())).code, 1);
    }

    #[test]
    fn settings_precedence() {
        let st = Settings { config: "p = 3\nr = \"inf\"\n".parse().unwrap() };
        assert_eq!(st.f64(Some(4.0), "p", Some(2.0)).ok(), Some(4.0));
        assert_eq!(st.f64(None, "p", Some(2.0)).ok(), Some(3.0));
        assert_eq!(st.f64(None, "s", Some(0.5)).ok(), Some(0.5));
        assert!(st.f64(None, "s", None).is_err());
        assert!(st.exponent(None, "r", Exponent::from(1.0)).ok().unwrap().is_infinite());
    }

    #[test]
    fn default_bands_stay_below_nyquist() {
        let lat = Lattice::new(1, 1024, 64.0).unwrap();
        let (lo, hi) = default_bands(&lat);
        assert!(1.75 * 2f64.powi(hi) <= lat.nyquist());
        assert!(0.875 * 2f64.powi(lo) >= 2.0 * std::f64::consts::PI / 64.0);
    }
}
