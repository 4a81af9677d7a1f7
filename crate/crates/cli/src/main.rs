mod document;
mod output;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;
use schurwalk::index::{BoundaryRoute, IndexOptions, IndexReport};
use schurwalk::schur::{eval_boundary, SchurParamSeq, Tail};
use schurwalk::spectral::{edge_state_profile, run_ring, spectrum_svg, write_profile_csv, write_spectrum_csv};
use schurwalk::{classify, forget_mod2, BoundaryPoint, WalkSpec};
use serde::Serialize;

use output::{float, write_atomic};

#[derive(Parser)]
#[command(name = "schurwalk", version, about = "Symmetry indices of one-dimensional quantum walks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the walk described by a JSON spec document.
    Classify(ClassifyArgs),
    /// Sweep split-step angles and write one CSV row per grid point.
    PhaseDiagram(PhaseArgs),
    /// Spectrum of a disordered crossover ring.
    Spectrum(SpectrumArgs),
    /// Evaluate a Schur function from its parameters.
    SchurEval(SchurArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Route {
    Exact,
    Resolvent,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Walk spec document.
    spec: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Boundary-value route; overrides the document.
    #[arg(long, value_enum)]
    route: Option<Route>,
    /// Cells beyond the window in the first resolvent truncation.
    #[arg(long)]
    window_radius: Option<usize>,
    #[arg(long)]
    tol_unitarity: Option<f64>,
    #[arg(long)]
    tol_boundary: Option<f64>,
    /// Reduce every index mod 2 (particle-hole symmetry alone).
    #[arg(long)]
    mod2: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepMode {
    /// Constant angles `(θ1, θ2)` everywhere.
    Ti,
    /// Left and right tails with independent `θ1`, fixed `θ2`.
    Crossover,
}

#[derive(Args)]
struct PhaseArgs {
    #[arg(long, value_enum, default_value = "ti")]
    mode: SweepMode,
    /// Points per axis; angles sit at π(2i + 1 - n) / (2n).
    #[arg(long, default_value_t = 101)]
    grid: usize,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    theta2_left: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    theta2_right: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Ring cells (even).
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.3)]
    eps: f64,
    #[arg(long, default_value_t = 0.2)]
    eps_prime: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Eigenvalue CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Edge-state profile CSV for the eigenvalue nearest to +1.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct SchurArgs {
    /// Leading parameters, separated by spaces or commas (`0.3 -0.2+0.1i`).
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    head: String,
    /// Parameters repeated forever after the head.
    #[arg(long, num_args = 1.., allow_negative_numbers = true, conflicts_with = "tail_terminating")]
    tail_periodic: Option<Vec<String>>,
    /// Final unimodular parameter.
    #[arg(long, allow_hyphen_values = true)]
    tail_terminating: Option<String>,
    /// Evaluation point with |z| < 1, or ±1.
    #[arg(long, allow_hyphen_values = true)]
    z: Option<String>,
    /// Also report f(+1) and f(-1).
    #[arg(long)]
    boundary: bool,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

/// Exit code for a walk whose tails are not gapped at ±1.
const EXIT_GAP_CLOSED: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    let result = match cli.command {
        Command::Classify(a) => cmd_classify(&a),
        Command::PhaseDiagram(a) => cmd_phase_diagram(&a).map(|()| ExitCode::SUCCESS),
        Command::Spectrum(a) => cmd_spectrum(&a).map(|()| ExitCode::SUCCESS),
        Command::SchurEval(a) => cmd_schur_eval(&a).map(|()| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("SCHURWALK_THREADS") else {
        return Ok(());
    };
    let n: usize = value.trim().parse().with_context(|| format!("SCHURWALK_THREADS={value:?} is not a count"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn cmd_classify(args: &ClassifyArgs) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(&args.spec).with_context(|| format!("reading {}", args.spec.display()))?;
    let doc = document::parse(&text).with_context(|| format!("parsing {}", args.spec.display()))?;
    let spec = doc.to_spec().with_context(|| format!("validating {}", args.spec.display()))?;
    let mut opts = doc.index_options();
    if let Some(r) = args.route {
        opts.route = match r {
            Route::Exact => BoundaryRoute::Exact,
            Route::Resolvent => BoundaryRoute::Resolvent,
        };
    }
    if let Some(w) = args.window_radius {
        opts.initial_margin = w;
    }
    if let Some(t) = args.tol_unitarity {
        opts.tolerances.unitarity = t;
    }
    if let Some(t) = args.tol_boundary {
        opts.tolerances.boundary = t;
    }
    let mut report = classify(&spec, &opts);
    if args.mod2 && report.triple().is_some() {
        report = forget_mod2(&report);
    }
    let json = serde_json::to_string_pretty(&report)?;
    if let Some(path) = &args.out {
        write_atomic(path, |w| writeln!(w, "{json}")).with_context(|| format!("writing {}", path.display()))?;
    }
    match args.format {
        Format::Json => println!("{json}"),
        Format::Table => print!("{}", report_table(&report)),
    }
    Ok(if report.gap_failure().is_some() {
        ExitCode::from(EXIT_GAP_CLOSED)
    } else if report.si_left.is_some() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn report_table(report: &IndexReport) -> String {
    let mut s = String::new();
    let show = |v: Option<schurwalk::index::SymmetryIndex>| v.map_or("-".to_string(), |v| v.to_string());
    let _ = writeln!(s, "model     {} (d = {})", report.model.name(), report.d);
    let _ = writeln!(s, "gapped    {}", if report.gapped { "yes" } else { "no" });
    let _ = writeln!(s, "siL       {}", show(report.si_left));
    let _ = writeln!(s, "siR       {}", show(report.si_right));
    let _ = writeln!(s, "si+       {}", show(report.si_plus));
    let _ = writeln!(s, "si-       {}", show(report.si_minus));
    let _ = writeln!(s, "phase     {}", report.phase_label);
    let diag = &report.diagnostics;
    for g in &diag.tail_gaps {
        let state = if g.gapped { "gapped" } else { "closed" };
        let _ = writeln!(s, "tail      {:<5} at {:+}: {state} (margin {:.3e})", g.side.name(), g.point, g.margin);
    }
    if let Some(r) = diag.boundary_residual {
        let _ = writeln!(s, "residual  {r:.3e}");
    }
    if let Some(x) = &diag.x_independence {
        let _ = writeln!(s, "sites     {:?} {}", x.sites, if x.consistent { "agree" } else { "DISAGREE" });
    }
    for m in &diag.messages {
        let _ = writeln!(s, "note      {m}");
    }
    s
}

fn grid_angles(n: usize) -> Vec<f64> {
    (0..n).map(|i| PI * (2 * i + 1) as f64 / (2 * n) as f64 - PI / 2.0).collect()
}

fn index_cells(report: &IndexReport) -> String {
    let show = |v: Option<schurwalk::index::SymmetryIndex>| v.map_or(String::new(), |v| v.to_string());
    format!(
        "{},{},{},{},{},{}",
        report.gapped,
        show(report.si_left),
        show(report.si_right),
        show(report.si_minus),
        show(report.si_plus),
        report.phase_label
    )
}

fn cmd_phase_diagram(args: &PhaseArgs) -> anyhow::Result<()> {
    if args.grid < 2 {
        bail!("--grid must be at least 2, got {}", args.grid);
    }
    let angles = grid_angles(args.grid);
    let points: Vec<(f64, f64)> = angles.iter().flat_map(|&a| angles.iter().map(move |&b| (a, b))).collect();
    let opts = IndexOptions::default();
    let (header, rows): (&str, Vec<anyhow::Result<String>>) = match args.mode {
        SweepMode::Ti => (
            "theta1,theta2,gapped,si_left,si_right,si_minus,si_plus,phase",
            points
                .par_iter()
                .map(|&(t1, t2)| {
                    let spec = WalkSpec::translation_invariant(t1, t2)?;
                    Ok(format!("{},{},{}", float(t1), float(t2), index_cells(&classify(&spec, &opts))))
                })
                .collect(),
        ),
        SweepMode::Crossover => (
            "theta1_left,theta2_left,theta1_right,theta2_right,gapped,si_left,si_right,si_minus,si_plus,phase",
            points
                .par_iter()
                .map(|&(l, r)| {
                    let (tl, tr) = (args.theta2_left, args.theta2_right);
                    let spec = WalkSpec::split_step((l, tl), (r, tr), Default::default())?;
                    let report = classify(&spec, &opts);
                    Ok(format!("{},{},{},{},{}", float(l), float(tl), float(r), float(tr), index_cells(&report)))
                })
                .collect(),
        ),
    };
    let rows: Vec<String> = rows.into_iter().collect::<anyhow::Result<_>>()?;
    write_atomic(&args.out, |w| {
        writeln!(w, "{header}")?;
        for row in &rows {
            writeln!(w, "{row}")?;
        }
        Ok(())
    })
    .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct SpectrumSummary {
    n_cells: usize,
    dim: usize,
    epsilon: f64,
    epsilon_prime: f64,
    seed: u64,
    unitarity_defect: f64,
    min_distance_plus: f64,
    min_distance_minus: f64,
    near_count: usize,
    threshold: f64,
    interfaces: [usize; 2],
}

fn cmd_spectrum(args: &SpectrumArgs) -> anyhow::Result<()> {
    let exp = run_ring(args.n, args.eps, args.eps_prime, args.seed)?;
    if let Some(path) = &args.out {
        write_atomic(path, |w| write_spectrum_csv(&exp, w)).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.svg {
        let svg = spectrum_svg(&exp);
        write_atomic(path, |w| w.write_all(svg.as_bytes())).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.profile {
        let profile = edge_state_profile(&exp, 1)?;
        write_atomic(path, |w| write_profile_csv(&profile, w)).with_context(|| format!("writing {}", path.display()))?;
    }
    let summary = SpectrumSummary {
        n_cells: exp.n_cells,
        dim: exp.dim(),
        epsilon: exp.epsilon,
        epsilon_prime: exp.epsilon_prime,
        seed: exp.seed,
        unitarity_defect: exp.unitarity_defect(),
        min_distance_plus: exp.min_distance(1),
        min_distance_minus: exp.min_distance(-1),
        near_count: exp.protected_count(),
        threshold: exp.threshold,
        interfaces: exp.interfaces(),
    };
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&summary)?),
        Format::Table => {
            println!("cells           {} (dimension {})", summary.n_cells, summary.dim);
            println!("disorder        eps {} eps' {} seed {}", summary.epsilon, summary.epsilon_prime, summary.seed);
            println!("interfaces      cells {} and {}", summary.interfaces[0], summary.interfaces[1]);
            println!("|λ| defect      {:.3e}", summary.unitarity_defect);
            println!("distance to +1  {:.6e}", summary.min_distance_plus);
            println!("distance to -1  {:.6e}", summary.min_distance_minus);
            println!("within {:.0e}    {}", summary.threshold, summary.near_count);
        }
    }
    Ok(())
}

fn parse_complex(s: &str) -> anyhow::Result<Complex64> {
    let t = s.trim();
    Complex64::from_str(t).map_err(|_| anyhow::anyhow!("cannot read {s:?} as a complex number"))
}

fn parse_list(s: &str) -> anyhow::Result<Vec<Complex64>> {
    s.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).map(parse_complex).collect()
}

#[derive(Serialize)]
struct ValueDoc {
    z: [f64; 2],
    value: [f64; 2],
    modulus: f64,
}

#[derive(Serialize)]
struct SchurDoc {
    head: Vec<[f64; 2]>,
    values: Vec<ValueDoc>,
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn cmd_schur_eval(args: &SchurArgs) -> anyhow::Result<()> {
    let head = parse_list(&args.head).context("--head")?;
    let tail = match (&args.tail_periodic, &args.tail_terminating) {
        (Some(p), _) => {
            let params = p.iter().map(|s| parse_list(s)).collect::<anyhow::Result<Vec<_>>>().context("--tail-periodic")?;
            Tail::Periodic(params.concat())
        }
        (None, Some(t)) => Tail::Terminating(parse_complex(t).context("--tail-terminating")?),
        (None, None) => Tail::Zero,
    };
    let seq = SchurParamSeq::new(head.clone(), tail)?;
    let mut values = Vec::new();
    if let Some(z) = &args.z {
        let z = parse_complex(z).context("--z")?;
        let value = if z == Complex64::new(1.0, 0.0) {
            eval_boundary(&seq, BoundaryPoint::Plus)?.value
        } else if z == Complex64::new(-1.0, 0.0) {
            eval_boundary(&seq, BoundaryPoint::Minus)?.value
        } else if z.norm() < 1.0 {
            seq.eval(z)?
        } else {
            bail!("--z must satisfy |z| < 1 or equal ±1, got {z}");
        };
        values.push(ValueDoc { z: pair(z), value: pair(value), modulus: value.norm() });
    }
    if args.boundary {
        for point in BoundaryPoint::BOTH {
            let v = eval_boundary(&seq, point)?;
            values.push(ValueDoc { z: pair(v.z), value: pair(v.value), modulus: v.value.norm() });
        }
    }
    if values.is_empty() {
        bail!("nothing to evaluate: pass --z or --boundary");
    }
    let doc = SchurDoc { head: head.into_iter().map(pair).collect(), values };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match args.format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?,
        Format::Table => {
            for v in &doc.values {
                writeln!(out, "f({}) = {}", show_complex(v.z), show_complex(v.value))?;
            }
        }
    }
    Ok(())
}

fn show_complex([re, im]: [f64; 2]) -> String {
    if im == 0.0 {
        format!("{re}")
    } else {
        format!("{re}{im:+}i")
    }
}
