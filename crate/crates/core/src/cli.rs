//! The `giantatom` command-line front end.
//!
//! Every subcommand writes one CSV table, to `--out` or stdout. With `--out`
//! a JSON sidecar next to the CSV records the arguments, the resolved
//! parameters and scalar results.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::delay::{bound_state_search, dde_evolve, probe_response, threshold_scan, BoundStateSearch, ThresholdFamily};
use crate::design::{fit_layout, DesignMode, DesignProblem};
use crate::error::{Error, Result};
use crate::grid::{parse_list, parse_number, parse_range};
use crate::lindblad::{
    basis_state, build_giant_atom_system, evolve_with, inversion_scan, multi_atom_system, steady_state,
    DensityTrajectory, Drive, EvolveOptions, GiantAtomOptions, InversionOptions, LindbladSystem,
};
use crate::model::CouplingPoint;
use crate::model::{
    classify_topology, equidistant_layout, AtomSpec, Layout, LayoutDocument, PhaseGrid, Topology, TransitionScaling,
    Waveguide,
};
use crate::multiatom::{decoherence_free_points, many_atom_coefficients, reference_spacing, topology_sweep};
use crate::oracle::{convergence_table, OracleAtom};
use crate::output::{num, write_outputs, Table};
use crate::spectral::{
    lamb_from_kramers_kronig, lamb_shift, lamb_shift_equidistant, lamb_shift_integral, relaxation_rate,
    relaxation_rate_equidistant, PvOptions, SpectralResponse,
};

/// Exit code for command-line usage errors.
pub const EXIT_USAGE: i32 = 64;

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "GIANTATOM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "giantatom", version, about = "Giant atoms in a one-dimensional waveguide")]
struct Cli {
    /// CSV output path; a JSON sidecar is written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Relaxation rate and Lamb shift against phase, normalized to the peak rate.
    Spectrum(SpectrumArgs),
    /// Lamb shift from the closed form, the principal-value integral and the Hilbert transform.
    Lamb(LambArgs),
    /// Exchange and relaxation coefficients of two giant atoms against phase.
    TwoAtom(TwoAtomArgs),
    /// Decoherence-free points of two giant atoms.
    Dfi(TwoAtomArgs),
    /// Master-equation time evolution.
    Evolve(EvolveArgs),
    /// Master-equation steady state.
    Steady(EvolveArgs),
    /// Steady-state population inversion of a driven three-level giant atom.
    InversionScan(InversionArgs),
    /// Single-excitation decay with time delays.
    Dde(DdeArgs),
    /// Weak-probe transmission spectrum with time delays.
    Probe(ProbeArgs),
    /// Probe peak count against the delay.
    Threshold(ThresholdArgs),
    /// Fit coupling strengths (and positions) to a target rate profile.
    Design(DesignArgs),
    /// Mode-summation convergence table for a single giant atom.
    Oracle(OracleArgs),
    /// Search for oscillating bound states with three or more points.
    BoundState(BoundStateArgs),
}

#[derive(Debug, Clone, Args)]
struct WaveguideArgs {
    /// Group velocity.
    #[arg(long = "v", default_value_t = 1.0)]
    v: f64,
    /// Single-point decay rate γ.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
}

#[derive(Debug, Clone, Args)]
struct LayoutArgs {
    /// Equidistant layout with this many unit-strength points.
    #[arg(long = "N", conflicts_with = "layout")]
    n: Option<usize>,
    /// Distance between neighbouring points.
    #[arg(long, default_value = "1")]
    spacing: String,
    /// Layout document (.toml or .json); its waveguide overrides --v/--gamma.
    #[arg(long)]
    layout: Option<PathBuf>,
    #[command(flatten)]
    waveguide: WaveguideArgs,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[command(flatten)]
    layout: LayoutArgs,
    /// Phase grid `start:stop:count`.
    #[arg(long, default_value = "0:4pi:2000")]
    phi: String,
}

#[derive(Debug, Args)]
struct LambArgs {
    #[command(flatten)]
    layout: LayoutArgs,
    #[arg(long, default_value = "pi/64:2pi:128")]
    phi: String,
    /// Samples per period for the Hilbert transform.
    #[arg(long, default_value_t = 8192)]
    hilbert_samples: usize,
}

#[derive(Debug, Args)]
struct TwoAtomArgs {
    /// Canonical pair: small, separate, braided or nested.
    #[arg(long, conflicts_with_all = ["layout_a", "layout_b"])]
    topology: Option<String>,
    #[arg(long, requires = "layout_b")]
    layout_a: Option<PathBuf>,
    #[arg(long, requires = "layout_a")]
    layout_b: Option<PathBuf>,
    #[arg(long, default_value = "0:2pi:1000")]
    phi: String,
    #[command(flatten)]
    waveguide: WaveguideArgs,
}

#[derive(Debug, Args)]
struct EvolveArgs {
    #[command(flatten)]
    layout: LayoutArgs,
    /// Two atoms of a canonical topology instead of one giant atom.
    #[arg(long)]
    topology: Option<String>,
    /// Phase of the lowest transition between neighbouring points.
    #[arg(long, default_value = "pi/2")]
    phi: String,
    #[arg(long, default_value_t = 2)]
    levels: usize,
    /// Level anharmonicity α: `ω_m = m·ω_10 + α·m(m−1)/2`.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    anharmonicity: String,
    /// Drive strength Ω_d; zero leaves the atom undriven.
    #[arg(long, default_value_t = 0.0)]
    drive: f64,
    #[arg(long, default_value_t = 0)]
    drive_lower: usize,
    /// Upper driven level; defaults to the top level.
    #[arg(long)]
    drive_upper: Option<usize>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    detuning: f64,
    /// Equal strengths on every transition instead of `√(m+1)` growth.
    #[arg(long)]
    flat: bool,
    /// Initial basis state (register index for --topology).
    #[arg(long, default_value_t = 1)]
    initial: usize,
    #[arg(long, default_value_t = 10.0)]
    t_end: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 10)]
    record_every: usize,
}

#[derive(Debug, Args)]
struct InversionArgs {
    #[arg(long = "N", default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    /// α in units of 2πv/d.
    #[arg(long, default_value_t = -0.1, allow_hyphen_values = true)]
    anharmonicity_factor: f64,
    #[arg(long, default_value = "0.05pi:1.95pi:91")]
    phi: String,
    /// Comma-separated drive strengths.
    #[arg(long, default_value = "0.1,0.2,0.5,1,2,5,10")]
    omega_d: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    detuning: f64,
    #[arg(long)]
    flat: bool,
    #[command(flatten)]
    waveguide: WaveguideArgs,
}

#[derive(Debug, Clone, Args)]
struct FrequencyArgs {
    /// Atomic frequency ω_a.
    #[arg(long, conflicts_with = "phase", allow_hyphen_values = true)]
    omega_a: Option<String>,
    /// Phase ω_a·d/v between the first two points.
    #[arg(long, default_value = "0")]
    phase: String,
}

#[derive(Debug, Args)]
struct DdeArgs {
    #[command(flatten)]
    layout: LayoutArgs,
    #[command(flatten)]
    frequency: FrequencyArgs,
    #[arg(long, default_value_t = 20.0)]
    t_end: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 10)]
    record_every: usize,
}

#[derive(Debug, Args)]
struct ProbeArgs {
    #[command(flatten)]
    layout: LayoutArgs,
    #[command(flatten)]
    frequency: FrequencyArgs,
    /// Probe detuning grid.
    #[arg(long, default_value = "-5:5:2001", allow_hyphen_values = true)]
    delta: String,
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    #[arg(long, default_value_t = 2)]
    points: usize,
    #[arg(long, default_value = "0")]
    phase: String,
    #[arg(long, default_value = "0.1:4:40")]
    gamma_tau: String,
    /// Half-width of the probe window in units of the zero-delay rate.
    #[arg(long, default_value_t = 3.0)]
    window: f64,
    #[arg(long, default_value_t = 4001)]
    samples: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Strengths,
    StrengthsAndPositions,
}

#[derive(Debug, Args)]
struct DesignArgs {
    /// Layout document holding initial positions and the `target` samples.
    #[arg(long)]
    layout: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Strengths)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.0)]
    regularization: f64,
    #[arg(long, default_value_t = 16)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    max_iterations: usize,
    /// Write the fitted layout as a document.
    #[arg(long)]
    save: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    layout: LayoutArgs,
    /// Phase between neighbouring points; lifted by whole periods so the
    /// mode window clears zero frequency.
    #[arg(long, default_value = "pi/2")]
    phi: String,
    /// Comma-separated mode counts.
    #[arg(long, default_value = "2048,4096,8192")]
    modes: String,
}

#[derive(Debug, Args)]
struct BoundStateArgs {
    #[arg(long, default_value_t = 4)]
    points: usize,
    #[arg(long)]
    free_strengths: bool,
    #[arg(long, default_value_t = 256)]
    starts: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Candidates verified by time evolution.
    #[arg(long, default_value_t = 3)]
    verify: usize,
    /// Verification run length in units of 1/γ.
    #[arg(long, default_value_t = 100.0)]
    run: f64,
    #[command(flatten)]
    waveguide: WaveguideArgs,
}

/// What a subcommand hands back for writing.
struct Report {
    table: Table,
    resolved: Value,
    result: Value,
}

impl Report {
    fn new(table: Table, resolved: Value) -> Self {
        Report { table, resolved, result: Value::Null }
    }
}

/// Parse `argv` (program name first), run the subcommand and return the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match execute(cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(text) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{THREADS_ENV} must be a positive integer, got '{text}'")))?;
    if n == 0 {
        return Err(Error::invalid(format!("{THREADS_ENV} must be positive")));
    }
    // A pool built earlier in the same process stays in place.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn execute(cli: Cli, argv: &[OsString]) -> Result<()> {
    configure_threads()?;
    let (name, report) = match &cli.command {
        Command::Spectrum(a) => ("spectrum", spectrum(a)?),
        Command::Lamb(a) => ("lamb", lamb(a)?),
        Command::TwoAtom(a) => ("two-atom", two_atom(a)?),
        Command::Dfi(a) => ("dfi", dfi(a)?),
        Command::Evolve(a) => ("evolve", evolve(a)?),
        Command::Steady(a) => ("steady", steady(a)?),
        Command::InversionScan(a) => ("inversion-scan", inversion(a)?),
        Command::Dde(a) => ("dde", dde(a)?),
        Command::Probe(a) => ("probe", probe(a)?),
        Command::Threshold(a) => ("threshold", threshold(a)?),
        Command::Design(a) => ("design", design(a)?),
        Command::Oracle(a) => ("oracle", oracle(a)?),
        Command::BoundState(a) => ("bound-state", bound_state(a)?),
    };
    let config: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let sidecar = json!({
        "command": name,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "resolved": report.resolved,
        "result": report.result,
    });
    write_outputs(&report.table, cli.out.as_deref(), &sidecar)
}

/// A `start:stop:count` range or a comma-separated list.
fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let v = if text.contains(',') { parse_list(text)? } else { parse_range(text)? };
    if v.is_empty() {
        return Err(Error::invalid(format!("grid '{text}' is empty")));
    }
    Ok(v)
}

fn waveguide_from(args: &WaveguideArgs) -> Result<Waveguide> {
    Waveguide::with_unit_rate(args.v, args.gamma)
}

struct ResolvedLayout {
    layout: Layout,
    waveguide: Waveguide,
    /// Distance that defines the phase `φ = ω·d/v`.
    spacing: f64,
    /// Point count when the layout came from `--N`.
    equidistant: Option<usize>,
    doc: Option<LayoutDocument>,
}

fn resolve_layout(args: &LayoutArgs) -> Result<ResolvedLayout> {
    let spacing = positive(parse_number(&args.spacing)?, "--spacing")?;
    if let Some(path) = &args.layout {
        let doc = LayoutDocument::load(path)?;
        let layout = doc.layout()?;
        let waveguide = if doc.waveguide.is_some() { doc.waveguide_model()? } else { waveguide_from(&args.waveguide)? };
        let d = if layout.len() > 1 { layout.first_spacing() } else { spacing };
        return Ok(ResolvedLayout { layout, waveguide, spacing: d, equidistant: None, doc: Some(doc) });
    }
    let n = args.n.ok_or_else(|| Error::invalid("give --N or --layout"))?;
    Ok(ResolvedLayout {
        layout: equidistant_layout(n, spacing, 1.0)?,
        waveguide: waveguide_from(&args.waveguide)?,
        spacing,
        equidistant: Some(n),
        doc: None,
    })
}

fn positive(x: f64, what: &str) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::invalid(format!("{what} must be positive, got {x}")))
    }
}

fn layout_json(r: &ResolvedLayout) -> Value {
    json!({
        "layout": r.layout,
        "waveguide": { "v": r.waveguide.velocity(), "gamma": r.waveguide.unit_rate() },
        "spacing": r.spacing,
    })
}

fn spectrum(a: &SpectrumArgs) -> Result<Report> {
    let r = resolve_layout(&a.layout)?;
    let phis = parse_grid(&a.phi)?;
    let gamma = r.waveguide.unit_rate();
    let sum: f64 = r.layout.strengths(0).map(f64::abs).sum();
    let peak = gamma * sum * sum;
    let mut t = Table::new(&["phi", "gamma_rel", "lamb_rel"]);
    for &phi in &phis {
        let (g, d) = match r.equidistant {
            Some(n) => (relaxation_rate_equidistant(n, phi, gamma), lamb_shift_equidistant(n, phi, gamma)),
            None => {
                let w = r.waveguide.frequency_for_phase(phi, r.spacing);
                (relaxation_rate(&r.layout, &r.waveguide, 0, w), lamb_shift(&r.layout, &r.waveguide, 0, w))
            }
        };
        t.push(vec![num(phi), num(g / peak), num(d / peak)]);
    }
    let mut rep = Report::new(t, layout_json(&r));
    rep.result = json!({ "gamma_max": peak });
    Ok(rep)
}

fn lamb(a: &LambArgs) -> Result<Report> {
    let r = resolve_layout(&a.layout)?;
    let phis = parse_grid(&a.phi)?;
    if a.hilbert_samples < 64 {
        return Err(Error::invalid("--hilbert-samples must be at least 64"));
    }
    // Γ(ω) repeats with period 2πv/d for equidistant points; otherwise a
    // long window stands in for the whole line.
    let periods = if r.layout.equidistant_spacing(1e-12).is_some() { 1 } else { 64 };
    let period = r.waveguide.frequency_for_phase(std::f64::consts::TAU, r.spacing) * periods as f64;
    let count = a.hilbert_samples * periods;
    let grid: Vec<f64> = (0..count).map(|i| period * i as f64 / count as f64).collect();
    let kk = lamb_from_kramers_kronig(&SpectralResponse::sample(&r.layout, &r.waveguide, 0, &grid)?)?;
    let pv = PvOptions::default();

    let mut t = Table::new(&["phi", "lamb_closed", "lamb_integral", "lamb_hilbert"]);
    for &phi in &phis {
        let w = r.waveguide.frequency_for_phase(phi, r.spacing);
        let closed = lamb_shift(&r.layout, &r.waveguide, 0, w);
        let integral = lamb_shift_integral(&r.layout, &r.waveguide, 0, w, &pv)?.value;
        let hilbert = interpolate_periodic(&kk.lamb, period, w);
        t.push(vec![num(phi), num(closed), num(integral), num(hilbert)]);
    }
    let mut rep = Report::new(t, layout_json(&r));
    rep.result = json!({ "hilbert_edge_warning": kk.edge_warning, "hilbert_periods": periods });
    Ok(rep)
}

/// Linear interpolation in samples covering `[0, period)` uniformly.
fn interpolate_periodic(samples: &[f64], period: f64, x: f64) -> f64 {
    let n = samples.len();
    let u = (x / period).rem_euclid(1.0) * n as f64;
    let i = (u.floor() as usize).min(n - 1);
    let f = u - i as f64;
    samples[i] * (1.0 - f) + samples[(i + 1) % n] * f
}

fn atom_pair(a: &TwoAtomArgs) -> Result<(Layout, Layout, Topology)> {
    match (&a.topology, &a.layout_a, &a.layout_b) {
        (Some(name), _, _) => {
            let topology = Topology::parse(name)?;
            let (x, y) = topology.canonical_pair()?;
            Ok((x, y, topology))
        }
        (None, Some(pa), Some(pb)) => {
            let x = LayoutDocument::load(pa)?.layout()?;
            let y = LayoutDocument::load(pb)?.layout()?;
            let topology = classify_topology(&x, &y)?;
            Ok((x, y, topology))
        }
        _ => Err(Error::invalid("give --topology or both --layout-a and --layout-b")),
    }
}

fn two_atom(a: &TwoAtomArgs) -> Result<Report> {
    let wg = waveguide_from(&a.waveguide)?;
    let phis = parse_grid(&a.phi)?;
    let mut t = Table::new(&["phi", "topology", "g", "Gamma_a", "Gamma_b", "Gamma_coll"]);
    let (x, y, topology) = atom_pair(a)?;
    let rows = if a.topology.is_some() {
        topology_sweep(topology, &phis, &wg)?
    } else {
        let d = reference_spacing(&x, &y)?;
        phis.iter()
            .map(|&phi| {
                let c = crate::multiatom::two_atom_coefficients(&x, &y, &wg, wg.frequency_for_phase(phi, d))?;
                Ok(crate::multiatom::TopologyRow {
                    phi,
                    topology,
                    g: c.g,
                    gamma_a: c.gamma_a,
                    gamma_b: c.gamma_b,
                    gamma_coll: c.gamma_coll,
                })
            })
            .collect::<Result<Vec<_>>>()?
    };
    for row in rows {
        t.push(vec![
            num(row.phi),
            row.topology.name().to_string(),
            num(row.g),
            num(row.gamma_a),
            num(row.gamma_b),
            num(row.gamma_coll),
        ]);
    }
    let resolved =
        json!({ "topology": topology.name(), "atom_a": x, "atom_b": y, "gamma": wg.unit_rate(), "v": wg.velocity() });
    Ok(Report::new(t, resolved))
}

fn dfi(a: &TwoAtomArgs) -> Result<Report> {
    let wg = waveguide_from(&a.waveguide)?;
    let (x, y, topology) = atom_pair(a)?;
    let points = decoherence_free_points(&x, &y, &wg, &PhaseGrid::new(parse_grid(&a.phi)?)?)?;
    let mut t = Table::new(&["phi", "g"]);
    for p in &points {
        t.push(vec![num(p.phi), num(p.g)]);
    }
    let resolved =
        json!({ "topology": topology.name(), "atom_a": x, "atom_b": y, "gamma": wg.unit_rate(), "v": wg.velocity() });
    let mut rep = Report::new(t, resolved);
    rep.result = json!({ "count": points.len() });
    Ok(rep)
}

/// Master equation and initial state for `evolve` and `steady`.
fn master_equation(a: &EvolveArgs) -> Result<(LindbladSystem, usize, Value)> {
    let phi = parse_number(&a.phi)?;
    if let Some(name) = &a.topology {
        let wg = waveguide_from(&a.layout.waveguide)?;
        let (x, y) = Topology::parse(name)?.canonical_pair()?;
        let coeffs = many_atom_coefficients(&[x, y], &wg, wg.frequency_for_phase(phi, 1.0))?;
        let system = multi_atom_system(&coeffs, coeffs.shifted[0])?;
        let resolved = json!({ "topology": name, "phi": phi, "coefficients": {
            "g": coeffs.exchange[0][1], "gamma": coeffs.rates, "gamma_coll": coeffs.collective[0][1] } });
        let d = system.dim();
        return Ok((system, d, resolved));
    }
    let r = resolve_layout(&a.layout)?;
    let alpha = parse_number(&a.anharmonicity)?;
    let atom = match r.doc.as_ref().map(|d| d.atom_spec()).transpose()?.flatten() {
        Some(atom) => atom,
        None => {
            let w10 = r.waveguide.frequency_for_phase(phi, r.spacing);
            let levels = (0..a.levels).map(|m| {
                let m = m as f64;
                m * w10 + 0.5 * alpha * m * (m - 1.0)
            });
            AtomSpec::new(levels.collect())?
        }
    };
    let d = atom.level_count();
    let drive = (a.drive != 0.0).then(|| Drive {
        lower: a.drive_lower,
        upper: a.drive_upper.unwrap_or(d - 1),
        strength: a.drive,
        detuning: a.detuning,
    });
    let scaling = if a.flat { TransitionScaling::Flat } else { TransitionScaling::Bosonic };
    let options = GiantAtomOptions { drive, scaling, rotating_frame: true };
    let system = build_giant_atom_system(&r.layout, &atom, &r.waveguide, &options)?;
    let mut resolved = layout_json(&r);
    resolved["atom"] = json!(atom);
    resolved["drive"] = json!(drive);
    resolved["scaling"] = json!(scaling);
    Ok((system, d, resolved))
}

fn population_header(d: usize) -> Vec<String> {
    (0..d).map(|k| format!("pop_{k}")).collect()
}

fn evolve(a: &EvolveArgs) -> Result<Report> {
    let (system, d, mut resolved) = master_equation(a)?;
    if a.initial >= d {
        return Err(Error::invalid(format!("--initial {} outside a {d}-dimensional space", a.initial)));
    }
    let options = EvolveOptions { record_every: a.record_every.max(1), ..EvolveOptions::default() };
    let traj: DensityTrajectory = evolve_with(&system, &basis_state(d, a.initial), a.t_end, a.dt, &options)?;
    let mut header = vec!["t".to_string()];
    header.extend(population_header(d));
    header.push("trace_err".into());
    let mut t = Table::new(&header);
    for ((time, pops), err) in traj.times.iter().zip(&traj.populations).zip(&traj.trace_errors) {
        let mut row = vec![num(*time)];
        row.extend(pops.iter().map(|p| num(*p)));
        row.push(num(*err));
        t.push(row);
    }
    resolved["initial"] = json!(a.initial);
    resolved["t_end"] = json!(a.t_end);
    resolved["dt"] = json!(a.dt);
    let mut rep = Report::new(t, resolved);
    rep.result = json!({ "max_trace_error": traj.trace_errors.iter().cloned().fold(0.0, f64::max) });
    Ok(rep)
}

fn steady(a: &EvolveArgs) -> Result<Report> {
    let (system, d, resolved) = master_equation(a)?;
    let rho = steady_state(&system)?;
    let mut t = Table::new(&population_header(d));
    t.push((0..d).map(|k| num(rho[(k, k)].re)).collect());
    Ok(Report::new(t, resolved))
}

fn inversion(a: &InversionArgs) -> Result<Report> {
    let options = InversionOptions {
        points: a.n,
        spacing: positive(a.spacing, "--spacing")?,
        anharmonicity_factor: a.anharmonicity_factor,
        scaling: if a.flat { TransitionScaling::Flat } else { TransitionScaling::Bosonic },
        detuning: a.detuning,
        waveguide: waveguide_from(&a.waveguide)?,
    };
    let phis = parse_grid(&a.phi)?;
    let drives = parse_list(&a.omega_d)?;
    if drives.is_empty() {
        return Err(Error::invalid("--omega-d is empty"));
    }
    let rows = inversion_scan(&options, &drives, &phis)?;
    let mut t = Table::new(&["phi", "Gamma_10", "Gamma_21", "pop0_ss", "pop1_ss", "pop2_ss", "inverted", "omega_d"]);
    for r in &rows {
        t.push(vec![
            num(r.phi),
            num(r.gamma_10),
            num(r.gamma_21),
            num(r.populations[0]),
            num(r.populations[1]),
            num(r.populations[2]),
            r.inverted.to_string(),
            num(r.omega_d),
        ]);
    }
    let mut rep = Report::new(t, json!({ "options": options, "anharmonicity": options.anharmonicity() }));
    rep.result = json!({ "inverted_rows": rows.iter().filter(|r| r.inverted).count() });
    Ok(rep)
}

fn atomic_frequency(f: &FrequencyArgs, r: &ResolvedLayout) -> Result<f64> {
    match &f.omega_a {
        Some(text) => parse_number(text),
        None => Ok(r.waveguide.frequency_for_phase(parse_number(&f.phase)?, r.spacing)),
    }
}

fn dde(a: &DdeArgs) -> Result<Report> {
    let r = resolve_layout(&a.layout)?;
    let omega_a = atomic_frequency(&a.frequency, &r)?;
    let traj = dde_evolve(&r.layout, &r.waveguide, omega_a, a.t_end, a.dt)?;
    let every = a.record_every.max(1);
    let last = traj.times.len() - 1;
    let mut t = Table::new(&["t", "re_c", "im_c", "pop", "energy_total"]);
    for i in (0..=last).filter(|i| i % every == 0 || *i == last) {
        let c: Complex64 = traj.amplitude[i];
        t.push(vec![num(traj.times[i]), num(c.re), num(c.im), num(c.norm_sqr()), num(traj.energy[i])]);
    }
    let mut resolved = layout_json(&r);
    resolved["omega_a"] = json!(omega_a);
    resolved["t_end"] = json!(a.t_end);
    resolved["dt"] = json!(a.dt);
    Ok(Report::new(t, resolved))
}

fn probe(a: &ProbeArgs) -> Result<Report> {
    let r = resolve_layout(&a.layout)?;
    let omega_a = atomic_frequency(&a.frequency, &r)?;
    let deltas = parse_grid(&a.delta)?;
    let s = probe_response(&r.layout, &r.waveguide, omega_a, &deltas)?;
    let mut t = Table::new(&["delta", "chi2", "n_peaks"]);
    for (d, c) in s.delta.iter().zip(&s.chi2) {
        t.push(vec![num(*d), num(*c), s.n_peaks.to_string()]);
    }
    let mut resolved = layout_json(&r);
    resolved["omega_a"] = json!(omega_a);
    let mut rep = Report::new(t, resolved);
    rep.result = json!({ "n_peaks": s.n_peaks, "peak_positions": s.peak_positions });
    Ok(rep)
}

fn threshold(a: &ThresholdArgs) -> Result<Report> {
    let family =
        ThresholdFamily { points: a.points, phase: parse_number(&a.phase)?, window: a.window, samples: a.samples };
    let scan = threshold_scan(&family, &parse_grid(&a.gamma_tau)?)?;
    let mut t = Table::new(&["gamma_tau", "n_peaks"]);
    for (g, p) in scan.gamma_tau.iter().zip(&scan.peaks) {
        t.push(vec![num(*g), p.to_string()]);
    }
    match scan.transition {
        Some(x) => eprintln!("peak-count transition at gamma_tau = {x}"),
        None => eprintln!("no 1 -> 2 peak-count transition in the scanned range"),
    }
    let mut rep = Report::new(t, json!({ "family": family }));
    rep.result = json!({ "transition": scan.transition });
    Ok(rep)
}

fn design(a: &DesignArgs) -> Result<Report> {
    let doc = LayoutDocument::load(&a.layout)?;
    let mut problem = DesignProblem::from_document(&doc)?;
    problem.mode = match a.mode {
        ModeArg::Strengths => DesignMode::Strengths,
        ModeArg::StrengthsAndPositions => DesignMode::StrengthsAndPositions,
    };
    problem.regularization = a.regularization;
    problem.starts = a.starts;
    problem.seed = a.seed;
    problem.max_iterations = a.max_iterations;
    let fit = fit_layout(&problem)?;

    let mut t = Table::new(&["point", "x", "strength"]);
    for (k, p) in fit.layout.points().iter().enumerate() {
        t.push(vec![k.to_string(), num(p.position), num(p.strength(0))]);
    }
    if let Some(path) = &a.save {
        LayoutDocument::from_layout(&fit.layout, None, Some(&problem.waveguide)).save(path)?;
    }
    let resolved = json!({
        "mode": problem.mode,
        "regularization": problem.regularization,
        "starts": problem.starts,
        "seed": problem.seed,
        "max_iterations": problem.max_iterations,
        "positions": problem.positions,
        "target_samples": problem.target.len(),
    });
    let mut rep = Report::new(t, resolved);
    rep.result = json!({
        "residual": fit.residual,
        "cost": fit.cost,
        "converged": fit.converged,
        "best_start": fit.best_start,
        "start_residuals": fit.start_residuals,
    });
    if !fit.converged {
        eprintln!("warning: design fit hit the iteration budget; best result written");
    }
    Ok(rep)
}

fn oracle(a: &OracleArgs) -> Result<Report> {
    let r = resolve_layout(&a.layout)?;
    let phi = parse_number(&a.phi)?;
    let counts: Vec<usize> = parse_list(&a.modes)?
        .into_iter()
        .map(|m| {
            if m >= 2.0 && m.fract() == 0.0 && m <= 1e7 {
                Ok(m as usize)
            } else {
                Err(Error::invalid(format!("mode count {m} is not a positive integer")))
            }
        })
        .collect::<Result<_>>()?;
    let bound = OracleAtom::new(r.layout.clone(), 1.0).rate_bound(&r.waveguide);
    // The exponential fit needs the Markov regime, so the layout is shrunk
    // until the travel time across it is 1e−3 of the fastest decay time.
    let v = r.waveguide.velocity();
    let extent = r.layout.extent();
    let scale = if extent > 0.0 { (1e-3 * v / (bound * extent)).min(1.0) } else { 1.0 };
    let points =
        r.layout.points().iter().map(|p| CouplingPoint::with_strengths(p.position * scale, p.strengths.clone()));
    let layout = Layout::new(r.layout.label(), points.collect())?;
    let spacing = r.spacing * scale;
    let period = r.waveguide.frequency_for_phase(std::f64::consts::TAU, spacing);
    let base = r.waveguide.frequency_for_phase(phi, spacing);
    let lift = ((60.0 * bound - base) / period).ceil().max(0.0);
    let omega = base + lift * period;
    let atom = OracleAtom::new(layout.clone(), omega);
    let rows = convergence_table(&atom, &r.waveguide, &counts)?;
    let formula = relaxation_rate(&layout, &r.waveguide, 0, omega);
    let mut t = Table::new(&["modes", "spacing", "gamma_fit", "lamb_fit", "norm_err", "gamma_formula"]);
    for row in &rows {
        t.push(vec![
            row.modes.to_string(),
            num(row.spacing),
            num(row.gamma),
            num(row.lamb),
            num(row.norm_error),
            num(formula),
        ]);
    }
    let mut resolved = layout_json(&r);
    resolved["omega"] = json!(omega);
    resolved["phi"] = json!(phi);
    resolved["length_scale"] = json!(scale);
    let mut rep = Report::new(t, resolved);
    rep.result = json!({ "gamma_formula": formula, "lamb_formula": lamb_shift(&layout, &r.waveguide, 0, omega) });
    Ok(rep)
}

fn bound_state(a: &BoundStateArgs) -> Result<Report> {
    let wg = waveguide_from(&a.waveguide)?;
    let opts = BoundStateSearch {
        points: a.points,
        free_strengths: a.free_strengths,
        starts: a.starts,
        seed: a.seed,
        verify: a.verify,
        run: a.run,
        ..BoundStateSearch::default()
    };
    let found = bound_state_search(&opts, &wg)?;
    let mut t = Table::new(&[
        "rank",
        "omega_a",
        "pole_1",
        "pole_2",
        "residue_1",
        "residue_2",
        "predicted_floor",
        "floor",
        "frequency",
        "persistent",
        "positions",
        "strengths",
    ]);
    let join = |xs: Vec<f64>| xs.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" ");
    for (k, c) in found.iter().enumerate() {
        let (floor, freq, persistent) = match &c.persistence {
            Some(p) => (num(p.floor), num(p.frequency), p.persistent.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        t.push(vec![
            k.to_string(),
            num(c.omega_a),
            num(c.poles[0]),
            num(c.poles[1]),
            num(c.residues[0]),
            num(c.residues[1]),
            num(c.predicted_floor),
            floor,
            freq,
            persistent,
            join(c.layout.positions().collect()),
            join(c.layout.strengths(0).collect()),
        ]);
    }
    let persistent = found.iter().filter(|c| c.persistence.as_ref().is_some_and(|p| p.persistent)).count();
    let mut rep = Report::new(t, json!({ "search": opts, "gamma": wg.unit_rate(), "v": wg.velocity() }));
    rep.result = json!({ "candidates": found.len(), "persistent": persistent });
    Ok(rep)
}
