use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use vpd::cubical::{cubical_diagrams, quantize_to_ground, GrayImage, GroundGrid, RawDiagram};
use vpd::diagram::{rho, w1_bruteforce, w1_distance, Diagram, VirtualDiagram};
use vpd::dual::{char_lip_bounds, char_lip_bruteforce, dirichlet_symbol, phase_lip, TorusPoint};
use vpd::heat::{gram_matrix, heat_mass, kernel_eval, lip_prefactor, QuadratureSpec};
use vpd::loss::{loss_demo, reports_to_csv, spearman, topo_loss_exact, topo_loss_rff};
use vpd::metric_pair::{build_metric_pair, graph_model_of, MetricPair, QuotientGraph};
use vpd::rff::{
    feature_map, rff_kernel, rff_lip_bound, rff_spectral_asymptotic_check, sample_heat_law,
    SamplerMode,
};

#[derive(Parser)]
#[command(name = "vpd", version, about = "Heat kernels and random Fourier features on virtual persistence diagrams")]
struct Cli {
    /// Write output here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate a metric pair or print its quotient metric
    Pair {
        #[command(subcommand)]
        cmd: PairCmd,
    },
    /// Exact W₁ distance between two diagrams
    W1 {
        #[arg(long)]
        pair: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Cross-check against the exhaustive oracle (small inputs only)
        #[arg(long)]
        bruteforce: bool,
    },
    /// Translation-invariant distance ρ between virtual diagrams
    Rho {
        #[arg(long)]
        pair: PathBuf,
        #[arg(long)]
        u: PathBuf,
        #[arg(long)]
        v: PathBuf,
    },
    /// Dirichlet symbol λ(θ) and character Lipschitz data at one θ
    Lambda {
        #[arg(long)]
        pair: PathBuf,
        /// Comma-separated angles, one per off-diagonal vertex
        #[arg(long)]
        theta: String,
        /// Radius for the enumerated character-seminorm lower bound
        #[arg(long, default_value_t = 2)]
        radius: i64,
    },
    /// Heat-kernel evaluations
    Kernel {
        #[command(subcommand)]
        cmd: KernelCmd,
    },
    /// Random Fourier features
    Rff {
        #[command(subcommand)]
        cmd: RffCmd,
    },
    /// Sublevel cubical persistence of an image (CSV or PGM)
    Cubical {
        image: PathBuf,
    },
    /// Quantize a raw diagram onto a regular ground grid
    Quantize {
        #[arg(long)]
        diagram: PathBuf,
        /// Grid spec lo:hi:cells, e.g. 0:1:4
        #[arg(long, default_value = "0:1:4")]
        grid_spec: String,
        /// Cap for essential deaths
        #[arg(long)]
        cap: f64,
    },
    /// Topological losses
    Loss {
        #[command(subcommand)]
        cmd: LossCmd,
    },
    /// 1-D slice of λ and the heat density along one torus axis (CSV)
    Slice {
        #[arg(long)]
        pair: PathBuf,
        #[arg(long, default_value_t = 0)]
        axis: usize,
        #[arg(long, default_value_t = 256)]
        points: usize,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
}

#[derive(Subcommand)]
enum PairCmd {
    Validate {
        #[arg(long)]
        pair: PathBuf,
    },
    Quotient {
        #[arg(long)]
        pair: PathBuf,
    },
}

#[derive(Subcommand)]
enum KernelCmd {
    Eval {
        #[arg(long)]
        pair: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        u: PathBuf,
        #[arg(long)]
        v: PathBuf,
        #[command(flatten)]
        quad: QuadArgs,
    },
    Gram {
        #[arg(long)]
        pair: PathBuf,
        #[arg(long)]
        t: f64,
        /// JSON file: list of coefficient vectors
        #[arg(long)]
        vs: PathBuf,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// heat_mass and lip_prefactor over a list of diffusion times
    Lipcurve {
        #[arg(long)]
        pair: PathBuf,
        /// Comma-separated times
        #[arg(long, default_value = "0,0.5,1,2,5,10")]
        times: String,
        #[command(flatten)]
        quad: QuadArgs,
    },
}

#[derive(Subcommand)]
enum RffCmd {
    Sample {
        #[arg(long)]
        pair: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        r: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Grid)]
        mode: ModeArg,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        burn_in: usize,
        #[arg(long, default_value_t = 10)]
        thinning: usize,
    },
    Features {
        #[arg(long)]
        pair: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        r: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Grid)]
        mode: ModeArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        v: PathBuf,
    },
    /// Compare the RFF kernel estimate against quadrature over resamples
    CheckUnbiased {
        #[arg(long)]
        pair: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 200)]
        resamples: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        gamma: PathBuf,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// Per-draw Lipschitz bound vs the spectral asymptotic
    CheckLip {
        #[arg(long)]
        pair: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Mh)]
        mode: ModeArg,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        quad: QuadArgs,
    },
}

#[derive(Subcommand)]
enum LossCmd {
    Exact {
        #[arg(long)]
        pair: PathBuf,
        #[arg(long)]
        gamma: PathBuf,
        #[arg(long)]
        t: f64,
        #[command(flatten)]
        quad: QuadArgs,
    },
    Rff {
        #[arg(long)]
        pair: PathBuf,
        #[arg(long)]
        gamma: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        r: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Grid)]
        mode: ModeArg,
        #[arg(long)]
        seed: u64,
    },
    /// Synthetic perturbation batch; CSV to stdout, Spearman to stderr
    Demo {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long)]
        noise: f64,
        #[arg(long, default_value_t = 100.0)]
        t: f64,
        #[arg(long, default_value_t = 256)]
        r: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Grid,
    Mh,
}

impl From<ModeArg> for SamplerMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Grid => SamplerMode::GridIcdf,
            ModeArg::Mh => SamplerMode::Metropolis,
        }
    }
}

#[derive(Args)]
struct QuadArgs {
    /// Tensor midpoint grid with this many points per dimension
    #[arg(long, conflicts_with_all = ["mc", "mc_seed"])]
    grid: Option<usize>,
    /// Monte Carlo with this many samples (requires --mc-seed)
    #[arg(long, requires = "mc_seed")]
    mc: Option<usize>,
    #[arg(long)]
    mc_seed: Option<u64>,
}

impl QuadArgs {
    fn spec(&self) -> Result<QuadratureSpec, CliError> {
        match (self.grid, self.mc) {
            (Some(m), None) => Ok(QuadratureSpec::tensor(m)),
            (None, Some(s)) => Ok(QuadratureSpec::monte_carlo(s, self.mc_seed.unwrap())),
            _ => Err(CliError::Validation(
                "exactly one of --grid or --mc is required".into(),
            )),
        }
    }
}

enum CliError {
    Validation(String),
    Numeric(String),
}

impl From<vpd::Error> for CliError {
    fn from(e: vpd::Error) -> Self {
        match e {
            vpd::Error::BadAcceptanceRate { .. } | vpd::Error::NegativeNormSquared { .. } => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("io: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(format!("json: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help/version are successes, everything else is a usage error
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

#[derive(serde::Deserialize)]
struct PairFile {
    dist: Vec<Vec<f64>>,
    subset_a: Vec<usize>,
}

fn load_pair(path: &PathBuf) -> Result<(MetricPair, QuotientGraph), CliError> {
    let pf: PairFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    let pair = build_metric_pair(pf.dist, pf.subset_a)?;
    let g = graph_model_of(&pair)?;
    Ok((pair, g))
}

fn load_diagram(path: &PathBuf) -> Result<Diagram, CliError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn load_virtual(path: &PathBuf) -> Result<VirtualDiagram, CliError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Validation(format!("bad number {x:?}: {e}")))
        })
        .collect()
}

fn load_image(path: &PathBuf) -> Result<GrayImage, CliError> {
    let text = fs::read_to_string(path)?;
    let img = if text.trim_start().starts_with("P2") {
        parse_pgm(&text)?
    } else {
        parse_csv_image(&text)?
    };
    Ok(img)
}

fn parse_csv_image(text: &str) -> Result<GrayImage, CliError> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(parse_f64_list)
        .collect::<Result<_, _>>()?;
    let height = rows.len();
    let width = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != width) {
        return Err(CliError::Validation("ragged CSV image".into()));
    }
    Ok(GrayImage::new(width, height, rows.concat())?)
}

fn parse_pgm(text: &str) -> Result<GrayImage, CliError> {
    let mut tokens = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(|l| l.split_whitespace());
    let magic = tokens.next().unwrap_or("");
    if magic != "P2" {
        return Err(CliError::Validation("only ASCII PGM (P2) is supported".into()));
    }
    let mut next_usize = |what: &str| -> Result<usize, CliError> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| CliError::Validation(format!("bad PGM {what}")))
    };
    let width = next_usize("width")?;
    let height = next_usize("height")?;
    let maxval = next_usize("maxval")?.max(1) as f64;
    let pixels: Vec<f64> = tokens
        .map(|t| {
            t.parse::<f64>()
                .map(|v| v / maxval)
                .map_err(|e| CliError::Validation(format!("bad PGM pixel {t:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    Ok(GrayImage::new(width, height, pixels)?)
}

fn parse_grid_spec(s: &str) -> Result<GroundGrid, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, cells] = parts.as_slice() else {
        return Err(CliError::Validation("grid spec must be lo:hi:cells".into()));
    };
    let lo: f64 = lo
        .parse()
        .map_err(|_| CliError::Validation("bad grid lo".into()))?;
    let hi: f64 = hi
        .parse()
        .map_err(|_| CliError::Validation("bad grid hi".into()))?;
    let cells: usize = cells
        .parse()
        .map_err(|_| CliError::Validation("bad grid cells".into()))?;
    if hi <= lo || cells < 2 {
        return Err(CliError::Validation(
            "grid spec needs hi > lo and cells ≥ 2".into(),
        ));
    }
    Ok(GroundGrid::regular(lo, hi, cells)?)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_json<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    emit(out, &s)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let out = cli.out;
    match cli.cmd {
        Cmd::Pair { cmd } => match cmd {
            PairCmd::Validate { pair } => {
                let (p, g) = load_pair(&pair)?;
                #[derive(Serialize)]
                struct Summary {
                    n_points: usize,
                    n_offdiag: usize,
                    n_edges: usize,
                    w_min: f64,
                    w_max: f64,
                    d_min: f64,
                    d_max: f64,
                }
                emit_json(
                    &out,
                    &Summary {
                        n_points: p.n_points(),
                        n_offdiag: g.n_offdiag(),
                        n_edges: g.n_edges(),
                        w_min: g.w_min(),
                        w_max: g.w_max(),
                        d_min: g.d_min(),
                        d_max: g.d_max(),
                    },
                )
            }
            PairCmd::Quotient { pair } => {
                let (p, _) = load_pair(&pair)?;
                let q = vpd::metric_pair::quotient_metric_1(&p);
                emit_json(&out, &q)
            }
        },
        Cmd::W1 {
            pair,
            a,
            b,
            bruteforce,
        } => {
            let (_, g) = load_pair(&pair)?;
            let da = load_diagram(&a)?;
            let db = load_diagram(&b)?;
            let (dist, matching) = w1_distance(&da, &db, &g)?;
            #[derive(Serialize)]
            struct Out {
                distance: f64,
                matching: vpd::diagram::Matching,
                #[serde(skip_serializing_if = "Option::is_none")]
                bruteforce: Option<f64>,
            }
            let bf = if bruteforce {
                Some(w1_bruteforce(&da, &db, &g)?)
            } else {
                None
            };
            emit_json(
                &out,
                &Out {
                    distance: dist,
                    matching,
                    bruteforce: bf,
                },
            )
        }
        Cmd::Rho { pair, u, v } => {
            let (_, g) = load_pair(&pair)?;
            let du = load_virtual(&u)?;
            let dv = load_virtual(&v)?;
            let d = rho(&du, &dv, &g)?;
            emit_json(&out, &serde_json::json!({ "rho": d }))
        }
        Cmd::Lambda {
            pair,
            theta,
            radius,
        } => {
            let (_, g) = load_pair(&pair)?;
            let th = TorusPoint::new(parse_f64_list(&theta)?);
            let lam = dirichlet_symbol(&th, &g)?;
            let pl = phase_lip(&th, &g)?;
            let (lo, hi) = char_lip_bounds(&th, &g)?;
            let bf = char_lip_bruteforce(&th, &g, radius)?;
            emit_json(
                &out,
                &serde_json::json!({
                    "lambda": lam,
                    "phase_lip": pl,
                    "char_lip_lower": lo,
                    "char_lip_upper": hi,
                    "char_lip_bruteforce": bf,
                }),
            )
        }
        Cmd::Kernel { cmd } => match cmd {
            KernelCmd::Eval { pair, t, u, v, quad } => {
                let (_, g) = load_pair(&pair)?;
                let q = quad.spec()?;
                let du = load_virtual(&u)?;
                let dv = load_virtual(&v)?;
                let est = kernel_eval(t, &du, &dv, &g, &q)?;
                emit_json(&out, &est)
            }
            KernelCmd::Gram { pair, t, vs, quad } => {
                let (_, g) = load_pair(&pair)?;
                let q = quad.spec()?;
                let coeffs: Vec<Vec<i64>> = serde_json::from_str(&fs::read_to_string(&vs)?)?;
                let vds: Vec<VirtualDiagram> =
                    coeffs.into_iter().map(VirtualDiagram::new).collect();
                let m = gram_matrix(t, &vds, &g, &q)?;
                emit_json(&out, &m)
            }
            KernelCmd::Lipcurve { pair, times, quad } => {
                let (_, g) = load_pair(&pair)?;
                let q = quad.spec()?;
                let mut csv = String::from("t,heat_mass,lip_prefactor\n");
                for t in parse_f64_list(&times)? {
                    let m = heat_mass(t, &g, &q)?.value;
                    let l = lip_prefactor(t, &g, &q)?.value;
                    csv.push_str(&format!("{t},{m},{l}\n"));
                }
                emit(&out, &csv)
            }
        },
        Cmd::Rff { cmd } => match cmd {
            RffCmd::Sample {
                pair,
                t,
                r,
                mode,
                seed,
                burn_in,
                thinning,
            } => {
                let (_, g) = load_pair(&pair)?;
                let fs = sample_heat_law(t, &g, r, mode.into(), seed, burn_in, thinning)?;
                emit_json(&out, &fs)
            }
            RffCmd::Features {
                pair,
                t,
                r,
                mode,
                seed,
                v,
            } => {
                let (_, g) = load_pair(&pair)?;
                let fs = sample_heat_law(t, &g, r, mode.into(), seed, 1000, 10)?;
                let dv = load_virtual(&v)?;
                let phi = feature_map(&dv, &fs)?;
                emit_json(&out, &phi)
            }
            RffCmd::CheckUnbiased {
                pair,
                t,
                r,
                resamples,
                seed,
                gamma,
                quad,
            } => {
                let (_, g) = load_pair(&pair)?;
                let q = quad.spec()?;
                let gam = load_virtual(&gamma)?;
                let zero = VirtualDiagram::zero(g.n_offdiag());
                let exact = kernel_eval(t, &gam, &zero, &g, &q)?.value;
                let vals: Vec<f64> = (0..resamples)
                    .map(|i| {
                        let fs = sample_heat_law(
                            t,
                            &g,
                            r,
                            SamplerMode::GridIcdf,
                            seed.wrapping_add(i as u64),
                            0,
                            0,
                        )?;
                        rff_kernel(&gam, &zero, &fs)
                    })
                    .collect::<Result<_, _>>()?;
                let (mean, se) = vpd::util::mean_and_se(&vals);
                emit_json(
                    &out,
                    &serde_json::json!({
                        "exact": exact,
                        "mean": mean,
                        "std_err": se,
                        "within_3se": (mean - exact).abs() <= 3.0 * se,
                    }),
                )
            }
            RffCmd::CheckLip {
                pair,
                t,
                r,
                trials,
                mode,
                seed,
                quad,
            } => {
                let (_, g) = load_pair(&pair)?;
                let q = quad.spec()?;
                let report =
                    rff_spectral_asymptotic_check(t, &g, trials, r, mode.into(), seed, &q)?;
                let fs = sample_heat_law(t, &g, r, mode.into(), seed, 1000, 10)?;
                let single = rff_lip_bound(&fs, &g)?;
                emit_json(
                    &out,
                    &serde_json::json!({ "report": report, "example_bound": single }),
                )
            }
        },
        Cmd::Cubical { image } => {
            let img = load_image(&image)?;
            let d = cubical_diagrams(&img);
            emit_json(&out, &d)
        }
        Cmd::Quantize {
            diagram,
            grid_spec,
            cap,
        } => {
            let rd: RawDiagram = serde_json::from_str(&fs::read_to_string(&diagram)?)?;
            let gg = parse_grid_spec(&grid_spec)?;
            let (d, disp) = quantize_to_ground(&rd, &gg, cap)?;
            emit_json(
                &out,
                &serde_json::json!({
                    "diagram": d,
                    "max_displacement": disp,
                    "finite_death_cap": cap,
                }),
            )
        }
        Cmd::Loss { cmd } => match cmd {
            LossCmd::Exact {
                pair,
                gamma,
                t,
                quad,
            } => {
                let (_, g) = load_pair(&pair)?;
                let q = quad.spec()?;
                let gam = load_virtual(&gamma)?;
                let l = topo_loss_exact(&gam, t, &g, &q)?;
                emit_json(&out, &serde_json::json!({ "loss_exact": l }))
            }
            LossCmd::Rff {
                pair,
                gamma,
                t,
                r,
                mode,
                seed,
            } => {
                let (_, g) = load_pair(&pair)?;
                let gam = load_virtual(&gamma)?;
                let fs = sample_heat_law(t, &g, r, mode.into(), seed, 1000, 10)?;
                let l = topo_loss_rff(&gam, &fs)?;
                emit_json(&out, &serde_json::json!({ "loss_rff": l }))
            }
            LossCmd::Demo {
                seed,
                n,
                noise,
                t,
                r,
            } => {
                let reports = loss_demo(seed, n, noise, t, r)?;
                let masses: Vec<f64> = reports.iter().map(|x| x.gamma_mass).collect();
                let exacts: Vec<f64> = reports.iter().map(|x| x.loss_exact).collect();
                eprintln!(
                    "spearman(gamma_mass, loss_exact) = {:.4}",
                    spearman(&masses, &exacts)
                );
                emit(&out, &reports_to_csv(&reports))
            }
        },
        Cmd::Slice {
            pair,
            axis,
            points,
            t,
        } => {
            let (_, g) = load_pair(&pair)?;
            if axis >= g.n_offdiag() {
                return Err(CliError::Validation(format!(
                    "axis {axis} out of range (N = {})",
                    g.n_offdiag()
                )));
            }
            let mut csv = String::from("theta,lambda,heat_density\n");
            for k in 0..points.max(2) {
                let x = k as f64 / points.max(2) as f64 * std::f64::consts::TAU;
                let mut coords = vec![0.0; g.n_offdiag()];
                coords[axis] = x;
                let lam = dirichlet_symbol(&TorusPoint::new(coords), &g)?;
                csv.push_str(&format!("{x},{lam},{}\n", (-t * lam).exp()));
            }
            emit(&out, &csv)
        }
    }
}
