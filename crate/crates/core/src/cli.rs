//! Command-line front end. [`run`] returns the process exit code:
//! 0 success, 1 usage or input error, 2 numerical failure, 3 I/O failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analytic::{
    contour_grid, performance_metrics, synthesize_network, Axis, AxisRange, BiasCoupling, ContourSpec, Metric,
    PerformanceMetrics, SynthesizedNetwork,
};
use crate::error::{Error, Result};
use crate::hb::{cascade_stages, extract_pmax, is_report, power_sweep, IsReport, PmaxEstimate};
use crate::io::units::{dbm_to_w, ratio_to_db, w_to_dbm};
use crate::io::{
    load_config, parse_netlist_bytes, parse_value, serialize_netlist, write_grid_csv, write_is_csv, write_sparams_csv,
    write_trace_csv, Config,
};
use crate::linear::{sweep_sparams, three_db_band};
use crate::model::{capacitance_at_bias, DesignPoint, Netlist, VaractorModel};
use crate::transient::{oracle_report, OracleReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

fn value(s: &str) -> std::result::Result<f64, String> {
    parse_value(s).ok_or_else(|| format!("not a number: '{s}'"))
}

#[derive(Debug, Parser)]
#[command(name = "pfsl", version, about = "Design and simulate parametric frequency selective limiters")]
struct Cli {
    /// JSON file with solver, sweep and varactor settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print results as JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a limiter and print its closed-form figures.
    Design(DesignArgs),
    /// Small-signal S-parameters of a netlist over a band.
    Analyze(AnalyzeArgs),
    /// Harmonic-balance power sweep with threshold and suppression extraction.
    Sweep(SweepArgs),
    /// Closed-form metric over a two-parameter grid.
    Contour(ContourArgs),
    /// Power sweep of m identical stages against a single stage.
    Cascade(CascadeArgs),
    /// Compare harmonic balance with time-domain integration.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
struct DeviceArgs {
    /// Reverse bias, V.
    #[arg(long, default_value = "1.1", value_parser = value)]
    vdc: f64,
    /// JSON varactor model; overrides the config file.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DesignArgs {
    #[arg(long, default_value = "2.1g", value_parser = value)]
    f_opt: f64,
    /// Quarter-wave transformer impedance, ohm.
    #[arg(long, default_value = "31", value_parser = value)]
    ztx: f64,
    /// Divided-frequency tank inductance, H.
    #[arg(long, default_value = "13n", value_parser = value)]
    la_seed: f64,
    /// Quality factor of the passive components.
    #[arg(long, default_value = "2000", value_parser = value)]
    ql: f64,
    #[arg(long, default_value = "50", value_parser = value)]
    z0: f64,
    #[command(flatten)]
    device: DeviceArgs,
    /// Write the synthesized netlist here.
    #[arg(long)]
    emit: Option<PathBuf>,
    /// Drive power written into the emitted netlist, dBm.
    #[arg(long, default_value = "0", allow_hyphen_values = true, value_parser = value)]
    p_in: f64,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    netlist: PathBuf,
    #[arg(long, value_parser = value)]
    f_start: f64,
    #[arg(long, value_parser = value)]
    f_stop: f64,
    #[arg(long, default_value = "201")]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepFlags {
    /// Drive frequency; defaults to the cw source frequency.
    #[arg(long, value_parser = value)]
    f_in: Option<f64>,
    #[arg(long, allow_hyphen_values = true, value_parser = value)]
    p_start: Option<f64>,
    #[arg(long, allow_hyphen_values = true, value_parser = value)]
    p_stop: Option<f64>,
    #[arg(long, value_parser = value)]
    step: Option<f64>,
    /// Reverse bias for P_max extraction; defaults to the netlist's.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    netlist: PathBuf,
    #[command(flatten)]
    sweep: SweepFlags,
    /// Sweep trace CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppression curve CSV.
    #[arg(long)]
    is_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CascadeArgs {
    netlist: PathBuf,
    #[arg(long, default_value = "2")]
    stages: usize,
    #[command(flatten)]
    sweep: SweepFlags,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ContourArgs {
    /// pth, il or pmax.
    #[arg(long)]
    metric: String,
    /// axis:start:stop:steps with axis one of cv, ztx, vdc, fin.
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
    #[arg(long, default_value = "2.1g", value_parser = value)]
    f_opt: f64,
    #[arg(long, default_value = "31", value_parser = value)]
    ztx: f64,
    #[arg(long, default_value = "50", value_parser = value)]
    z0: f64,
    #[command(flatten)]
    device: DeviceArgs,
    /// Keep the capacitance fixed when sweeping bias.
    #[arg(long)]
    fixed_capacitance: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct OracleArgs {
    netlist: PathBuf,
    /// Run length in drive periods.
    #[arg(long, value_parser = value)]
    periods: Option<f64>,
    #[arg(long)]
    steps_per_period: Option<usize>,
    /// Drive power override, dBm.
    #[arg(long, allow_hyphen_values = true, value_parser = value)]
    p_in: Option<f64>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match dispatch(&cli, &mut out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_IO,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let config = match &cli.config {
        Some(p) => load_config(p)?,
        None => Config::default(),
    };
    let ctx = Ctx {
        config,
        json: cli.json,
        out,
    };
    match &cli.command {
        Command::Design(a) => design(ctx, a),
        Command::Analyze(a) => analyze(ctx, a),
        Command::Sweep(a) => sweep(ctx, a),
        Command::Contour(a) => contour(ctx, a),
        Command::Cascade(a) => cascade(ctx, a),
        Command::Oracle(a) => oracle(ctx, a),
    }
}

struct Ctx<'a> {
    config: Config,
    json: bool,
    out: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn emit_json<T: Serialize>(&mut self, v: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(v).expect("results are serializable");
        self.line(&text)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}").map_err(|e| Error::io("<stdout>", e))
    }

    fn varactor(&self, path: Option<&Path>) -> Result<VaractorModel> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| Error::Parse {
                    line: e.line(),
                    column: e.column(),
                    message: e.to_string(),
                })
            }
            None => Ok(self.config.varactor),
        }
    }
}

fn read_netlist(path: &Path) -> Result<Netlist> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let net = parse_netlist_bytes(&bytes)?;
    net.validate()?;
    Ok(net)
}

#[derive(Serialize)]
struct DesignOutput {
    network: SynthesizedNetwork,
    metrics: PerformanceMetrics,
}

fn design(mut ctx: Ctx, a: &DesignArgs) -> Result<()> {
    let model = ctx.varactor(a.device.model.as_deref())?;
    let dv = capacitance_at_bias(&model, a.device.vdc)?;
    let dp = DesignPoint::new(a.z0, a.f_opt, a.ql)?;
    let network = synthesize_network(&dv, &dp, a.ztx, a.la_seed)?;
    let metrics = performance_metrics(&dv, &dp, a.ztx);
    if let Some(path) = &a.emit {
        let text = serialize_netlist(&network.to_netlist(dbm_to_w(a.p_in)));
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    if ctx.json {
        return ctx.emit_json(&DesignOutput { network, metrics });
    }
    let n = &network;
    ctx.line(&format!(
        "varactor: C_v = {:.4} pF, delta = {:.4} /V at {} V",
        dv.c_v * 1e12,
        dv.delta,
        dv.v_dc
    ))?;
    ctx.line(&format!(
        "transformer: Z_tx = {} ohm, L_T = {:.4} nH, C_T = {:.4} pF",
        n.transformer.z_tx,
        n.transformer.l_t * 1e9,
        n.transformer.c_t * 1e12
    ))?;
    ctx.line(&format!(
        "tank A: L_a = {:.4} nH, C_a = {:.4} pF; tank B: L_b = {:.4} nH, C_b = {:.4} pF; L_c = {:.4} nH",
        n.l_a * 1e9,
        n.c_a * 1e12,
        n.l_b * 1e9,
        n.c_b * 1e12,
        n.l_c * 1e9
    ))?;
    ctx.line(&format!("P_th  = {:.2} dBm", w_to_dbm(metrics.p_th)))?;
    ctx.line(&format!("IL    = {:.2} dB", ratio_to_db(metrics.il_ss)))?;
    ctx.line(&format!("P_max = {:.2} dBm", w_to_dbm(metrics.p_max)))?;
    ctx.line(&format!("V_th  = {:.4} V", metrics.v_th))
}

fn analyze(mut ctx: Ctx, a: &AnalyzeArgs) -> Result<()> {
    let net = read_netlist(&a.netlist)?;
    let pts = sweep_sparams(&net, a.f_start, a.f_stop, a.points)?;
    if let Some(path) = &a.out {
        write_sparams_csv(&pts, path)?;
    }
    let band = three_db_band(&pts);
    if ctx.json {
        return ctx.emit_json(&(&pts, band));
    }
    ctx.line("f_hz,s21_db,s11_db")?;
    for s in &pts {
        ctx.line(&format!("{:e},{:.4},{:.4}", s.frequency, s.s21_db(), s.s11_db()))?;
    }
    match band {
        Some(b) => ctx.line(&format!(
            "3 dB band {:.4e}..{:.4e} Hz ({:.1}%)",
            b.f_low,
            b.f_high,
            100.0 * b.fractional()
        )),
        None => ctx.line("3 dB band not contained in the sweep"),
    }
}

struct SweepSetup {
    f_in: f64,
    p_start: f64,
    p_stop: f64,
    step: f64,
}

fn setup(ctx: &Ctx, net: &Netlist, s: &SweepFlags) -> Result<SweepSetup> {
    let f_in = match s.f_in {
        Some(f) => f,
        None => {
            net.cw_source()
                .ok_or_else(|| Error::Config("netlist has no cw source (V line)".into()))?
                .1
                .freq
        }
    };
    let c = ctx.config.sweep;
    Ok(SweepSetup {
        f_in,
        p_start: dbm_to_w(s.p_start.unwrap_or(c.p_start_dbm)),
        p_stop: dbm_to_w(s.p_stop.unwrap_or(c.p_stop_dbm)),
        step: s.step.unwrap_or(c.step_db),
    })
}

#[derive(Serialize)]
struct SweepOutput {
    report: IsReport,
    p_max: PmaxEstimate,
}

fn device(net: &Netlist) -> Result<crate::model::BiasedVaractor> {
    net.varactors()
        .next()
        .map(|(_, dv)| *dv)
        .ok_or_else(|| Error::Config("netlist has no varactor (X line)".into()))
}

fn report(ctx: &Ctx, trace: &crate::hb::SweepTrace, dv: &crate::model::BiasedVaractor) -> Result<SweepOutput> {
    let report = is_report(trace, dv, ctx.config.sweep.psub_floor)?;
    let p_max = extract_pmax(trace, dv, Some(report.p_th))?;
    Ok(SweepOutput { report, p_max })
}

fn sweep_and_report(ctx: &Ctx, net: &Netlist, s: &SweepSetup) -> Result<(crate::hb::SweepTrace, SweepOutput)> {
    let dv = device(net)?;
    let trace = power_sweep(net, s.f_in, s.p_start, s.p_stop, s.step, ctx.config.hb)?;
    let output = report(ctx, &trace, &dv)?;
    Ok((trace, output))
}

fn print_report(ctx: &mut Ctx, label: &str, o: &SweepOutput) -> Result<()> {
    let r = &o.report;
    let dbm = |p: Option<f64>| p.map_or("-".to_string(), |p| format!("{:.2} dBm", w_to_dbm(p)));
    ctx.line(&format!("{label}P_th = {:.2} dBm", w_to_dbm(r.p_th)))?;
    ctx.line(&format!("{label}IL_ss = {:.3} dB", r.il_ss))?;
    ctx.line(&format!(
        "{label}P_max = {:.2} dBm{}",
        w_to_dbm(r.p_max),
        if r.p_max_reached { "" } else { " (not reached; top of sweep)" }
    ))?;
    ctx.line(&format!(
        "{label}markers: S21 max {}, S11 min {}",
        dbm(o.p_max.s21_marker),
        dbm(o.p_max.s11_marker)
    ))?;
    ctx.line(&format!("{label}IS_max below P_max = {:.2} dB", r.is_max_below_pmax))?;
    if let Some(&(p, is)) = r.curve.last() {
        ctx.line(&format!("{label}IS at {:.1} dBm = {:.2} dB", w_to_dbm(p), is))?;
    }
    Ok(())
}

fn sweep(mut ctx: Ctx, a: &SweepArgs) -> Result<()> {
    let mut net = read_netlist(&a.netlist)?;
    if let Some(p) = &a.sweep.model {
        net = with_model(&net, &ctx.varactor(Some(p))?)?;
    }
    let s = setup(&ctx, &net, &a.sweep)?;
    let dv = device(&net)?;
    let trace = power_sweep(&net, s.f_in, s.p_start, s.p_stop, s.step, ctx.config.hb)?;
    // the trace is useful even when too short for threshold extraction
    if let Some(path) = &a.out {
        write_trace_csv(&trace, path)?;
    }
    let output = report(&ctx, &trace, &dv)?;
    if let Some(path) = &a.is_out {
        write_is_csv(&output.report, path)?;
    }
    if ctx.json {
        return ctx.emit_json(&output);
    }
    print_report(&mut ctx, "", &output)
}

/// Replaces every varactor model, keeping each element's bias.
fn with_model(net: &Netlist, model: &VaractorModel) -> Result<Netlist> {
    let mut out = net.clone();
    for e in &mut out.elements {
        if let crate::model::ElementKind::Varactor { device, .. } = &mut e.kind {
            *device = capacitance_at_bias(model, device.v_dc)?;
        }
    }
    Ok(out)
}

fn cascade(mut ctx: Ctx, a: &CascadeArgs) -> Result<()> {
    let mut net = read_netlist(&a.netlist)?;
    if let Some(p) = &a.sweep.model {
        net = with_model(&net, &ctx.varactor(Some(p))?)?;
    }
    let s = setup(&ctx, &net, &a.sweep)?;
    let (_, single) = sweep_and_report(&ctx, &net, &s)?;
    let chained = cascade_stages(&net, a.stages)?;
    let (trace, multi) = sweep_and_report(&ctx, &chained, &s)?;
    if let Some(path) = &a.out {
        write_trace_csv(&trace, path)?;
    }
    if ctx.json {
        return ctx.emit_json(&[single, multi]);
    }
    print_report(&mut ctx, "m=1  ", &single)?;
    print_report(&mut ctx, &format!("m={:<3}", a.stages), &multi)?;
    ctx.line(&format!(
        "delta: P_th {:+.2} dB, IL_ss {:+.3} dB",
        w_to_dbm(multi.report.p_th) - w_to_dbm(single.report.p_th),
        multi.report.il_ss - single.report.il_ss
    ))
}

fn parse_axis(spec: &str) -> Result<AxisRange> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("axis must be name:start:stop:steps, got '{spec}'"));
    if parts.len() != 4 {
        return Err(bad());
    }
    let axis = match parts[0].to_ascii_lowercase().as_str() {
        "cv" => Axis::Cv,
        "ztx" => Axis::Ztx,
        "vdc" => Axis::Vdc,
        "fin" => Axis::Fin,
        other => return Err(Error::Config(format!("unknown axis '{other}' (cv, ztx, vdc, fin)"))),
    };
    Ok(AxisRange {
        axis,
        start: parse_value(parts[1]).ok_or_else(bad)?,
        stop: parse_value(parts[2]).ok_or_else(bad)?,
        steps: parts[3].parse().map_err(|_| bad())?,
    })
}

fn contour(mut ctx: Ctx, a: &ContourArgs) -> Result<()> {
    let metric = match a.metric.to_ascii_lowercase().as_str() {
        "pth" => Metric::PTh,
        "il" | "ilss" => Metric::IlSs,
        "pmax" => Metric::PMax,
        other => return Err(Error::Config(format!("unknown metric '{other}' (pth, il, pmax)"))),
    };
    let model = ctx.varactor(a.device.model.as_deref())?;
    let spec = ContourSpec {
        metric,
        x: parse_axis(&a.x)?,
        y: parse_axis(&a.y)?,
        varactor: capacitance_at_bias(&model, a.device.vdc)?,
        design: DesignPoint::new(a.z0, a.f_opt, f64::INFINITY)?,
        z_tx: a.ztx,
        coupling: if a.fixed_capacitance {
            BiasCoupling::Fixed
        } else {
            BiasCoupling::FromModel
        },
    };
    let grid = contour_grid(&spec)?;
    write_grid_csv(&grid, &a.out)?;
    if ctx.json {
        return ctx.emit_json(&grid);
    }
    ctx.line(&format!(
        "{} x {} cells written to {} ({} not evaluable)",
        grid.nx,
        grid.ny,
        a.out.display(),
        grid.nan_count
    ))
}

fn oracle(mut ctx: Ctx, a: &OracleArgs) -> Result<()> {
    let mut net = read_netlist(&a.netlist)?;
    if let Some(p) = a.p_in {
        net = net.with_drive_power(dbm_to_w(p));
    }
    let mut opts = ctx.config.oracle;
    if let Some(p) = a.periods {
        opts.periods = p;
    }
    if let Some(s) = a.steps_per_period {
        opts.steps_per_period = s;
    }
    opts.hb = ctx.config.hb;
    let r: OracleReport = oracle_report(&net, &opts)?;
    if ctx.json {
        return ctx.emit_json(&r);
    }
    ctx.line("node,k,hb_v,transient_v,rel_error")?;
    for l in r.resolved() {
        ctx.line(&format!(
            "{},{},{:.6e},{:.6e},{:.3e}",
            l.node,
            l.k,
            l.hb,
            l.transient,
            l.relative_error()
        ))?;
    }
    ctx.line(&format!(
        "max relative error {:.3e}; energy audit error {:.3e}; P_sub {:.2} dBm{}",
        r.max_relative_error(),
        r.energy.relative_error(),
        w_to_dbm(r.p_sub),
        if r.phase_shifted { "; other period-doubled phase state" } else { "" }
    ))
}
