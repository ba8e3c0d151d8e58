//! `dotlab` command-line tool.

mod commands;
mod output;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dotlab::device::TuningStrategy;
use dotlab::spin::{BarrierRamp, ExchangeModel};

#[derive(Parser)]
#[command(name = "dotlab", version, about = "Quantum-dot device simulation and exchange-tunability calibration")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Device config (JSON); the bundled reference device when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "dotlab-out")]
    pub output_dir: PathBuf,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Master seed for shot noise.
    #[arg(long, global = true, env = "DOTLAB_SEED")]
    pub seed: Option<u64>,
}

#[derive(Args, Clone, Debug)]
pub struct GridArgs {
    #[arg(long, default_value_t = 400)]
    pub nx: usize,
    #[arg(long, default_value_t = 160)]
    pub nz: usize,
    /// Use damped mixing with this fraction instead of Newton iteration.
    #[arg(long)]
    pub damping: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iterations: usize,
}

#[derive(Args, Clone, Debug)]
pub struct ReadoutArgs {
    /// Single shots per point; 0 gives exact probabilities.
    #[arg(long, default_value_t = 0)]
    pub shots: usize,
    /// Readout signal-to-noise ratio.
    #[arg(long, default_value_t = 10.6)]
    pub snr: f64,
    /// Perfect parity readout.
    #[arg(long)]
    pub ideal_readout: bool,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum StrategyArg {
    Conventional,
    Interchanged,
}

impl From<StrategyArg> for TuningStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Conventional => TuningStrategy::Conventional,
            StrategyArg::Interchanged => TuningStrategy::Interchanged,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum StrategyChoice {
    Conventional,
    Interchanged,
    Both,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum RampArg {
    Adiabatic,
    Sudden,
}

impl From<RampArg> for BarrierRamp {
    fn from(r: RampArg) -> Self {
        match r {
            RampArg::Adiabatic => BarrierRamp::Adiabatic,
            RampArg::Sudden => BarrierRamp::Sudden,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum ExchangeArg {
    Secular,
    Heisenberg,
}

impl From<ExchangeArg> for ExchangeModel {
    fn from(e: ExchangeArg) -> Self {
        match e {
            ExchangeArg::Secular => ExchangeModel::Secular,
            ExchangeArg::Heisenberg => ExchangeModel::Heisenberg,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum Figure {
    #[value(name = "2c")]
    F2c,
    #[value(name = "3b")]
    F3b,
    #[value(name = "3c")]
    F3c,
    #[value(name = "4a")]
    F4a,
    #[value(name = "4b")]
    F4b,
}

#[derive(Subcommand)]
enum Command {
    /// Self-consistent potential along the channel (x_nm, U_eV).
    SimulatePotential {
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        /// Override one gate voltage, GATE=VOLTS; repeatable.
        #[arg(long = "set", value_name = "GATE=VOLTS")]
        set: Vec<String>,
        /// Sweep this gate and write one profile per voltage.
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 0.3)]
        to: f64,
        #[arg(long, default_value_t = 4)]
        points: usize,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Tunnel coupling against the voltage on a barrier gate.
    SweepTunnelCoupling {
        #[arg(long, value_enum, default_value = "both")]
        strategy: StrategyChoice,
        /// Barrier gate, by role label or physical id.
        #[arg(long, default_value = "B3")]
        barrier: String,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 0.3)]
        to: f64,
        #[arg(long, default_value_t = 31)]
        points: usize,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Constant-interaction charge stability map of a double dot.
    StabilityDiagram {
        /// Charging energies of dot 1 and dot 2, eV.
        #[arg(long, default_value = "3e-3,3e-3")]
        charging: String,
        /// Mutual charging energy, eV.
        #[arg(long, default_value_t = 0.6e-3)]
        mutual: f64,
        /// Lever arms a11,a12,a21,a22 (dot i, gate j).
        #[arg(long, default_value = "0.1,0.02,0.02,0.1")]
        lever: String,
        /// Gate 1 range START:STOP:POINTS, V.
        #[arg(long, default_value = "0:0.12:121")]
        v1: String,
        #[arg(long, default_value = "0:0.12:121")]
        v2: String,
        #[arg(long, default_value_t = 3)]
        max_electrons: u32,
    },
    /// Parity-readout Rabi oscillation against burst length.
    Rabi {
        #[arg(long, default_value = "Q1")]
        qubit: String,
        #[arg(long, default_value_t = 2e-6)]
        tmax: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
        /// Drive detuning from resonance, Hz.
        #[arg(long, default_value_t = 0.0)]
        detuning: f64,
        #[command(flatten)]
        readout: ReadoutArgs,
    },
    /// Target flip probability against drive frequency and barrier amplitude.
    ExchangeSpectroscopy {
        /// CONTROL,TARGET
        #[arg(long, default_value = "Q1,Q2")]
        pair: String,
        #[arg(long, default_value_t = 0.0)]
        v_from: f64,
        #[arg(long, default_value_t = 0.28)]
        v_to: f64,
        #[arg(long, default_value_t = 15)]
        v_points: usize,
        #[arg(long, default_value_t = 241)]
        f_points: usize,
        /// Drive Rabi frequency, Hz; the target's configured value when omitted.
        #[arg(long)]
        rabi: Option<f64>,
        /// Barrier switching relative to the Zeeman gradient.
        #[arg(long, value_enum, default_value = "adiabatic")]
        ramp: RampArg,
        #[command(flatten)]
        readout: ReadoutArgs,
    },
    /// Decoupled-CZ trace against total exchange time.
    Dcz {
        /// CONTROL,TARGET
        #[arg(long, default_value = "Q1,Q2")]
        pair: String,
        /// Barrier pulse amplitude, V.
        #[arg(long)]
        amplitude: f64,
        #[arg(long, default_value_t = 4e-6)]
        tmax: f64,
        #[arg(long, default_value_t = 160)]
        points: usize,
        #[arg(long, value_enum, default_value = "secular")]
        exchange: ExchangeArg,
        #[command(flatten)]
        readout: ReadoutArgs,
    },
    /// Exponential fits J = A exp(B v) per pair and strategy.
    FitTunability {
        /// PAIR:STRATEGY:PATH to a CSV with columns v_volts,j_hz; repeatable.
        #[arg(long = "curve", value_name = "PAIR:STRATEGY:PATH", required = true)]
        curves: Vec<String>,
        /// Restrict fits to LO,HI volts.
        #[arg(long)]
        window: Option<String>,
    },
    /// Tables comparing strategies, and lever-arm excess when lever ratios are given.
    Report {
        /// JSON written by fit-tunability.
        #[arg(long)]
        tunability: PathBuf,
        /// Lever-arm ratios per pair, comma separated.
        #[arg(long)]
        lever: Option<String>,
    },
    /// Data behind one figure of the strategy comparison.
    Reproduce {
        #[arg(long, value_enum)]
        fig: Figure,
        #[command(flatten)]
        readout: ReadoutArgs,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SimulatePotential { .. } => "simulate-potential",
            Command::SweepTunnelCoupling { .. } => "sweep-tunnel-coupling",
            Command::StabilityDiagram { .. } => "stability-diagram",
            Command::Rabi { .. } => "rabi",
            Command::ExchangeSpectroscopy { .. } => "exchange-spectroscopy",
            Command::Dcz { .. } => "dcz",
            Command::FitTunability { .. } => "fit-tunability",
            Command::Report { .. } => "report",
            Command::Reproduce { .. } => "reproduce",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let started = Instant::now();
    if let Some(n) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    let ctx = commands::Context::new(&cli.common)?;
    let mut out = output::OutputDir::create(&cli.common.output_dir)?;
    let name = cli.command.name();
    use commands as c;
    match cli.command {
        Command::SimulatePotential { strategy, set, sweep, from, to, points, grid } => {
            c::simulate_potential(&ctx, &mut out, strategy, &set, sweep.as_deref(), (from, to, points), &grid)?
        }
        Command::SweepTunnelCoupling { strategy, barrier, from, to, points, grid } => {
            c::sweep_tunnel_coupling(&ctx, &mut out, strategy, &barrier, (from, to, points), &grid)?
        }
        Command::StabilityDiagram { charging, mutual, lever, v1, v2, max_electrons } => {
            c::stability(&mut out, &charging, mutual, &lever, &v1, &v2, max_electrons)?
        }
        Command::Rabi { qubit, tmax, points, detuning, readout } => {
            c::rabi(&ctx, &mut out, &qubit, tmax, points, detuning, &readout)?
        }
        Command::ExchangeSpectroscopy { pair, v_from, v_to, v_points, f_points, rabi, ramp, readout } => {
            c::spectroscopy(&ctx, &mut out, &pair, (v_from, v_to, v_points), f_points, rabi, ramp.into(), &readout)?
        }
        Command::Dcz { pair, amplitude, tmax, points, exchange, readout } => {
            c::dcz(&ctx, &mut out, &pair, amplitude, tmax, points, exchange.into(), &readout)?
        }
        Command::FitTunability { curves, window } => c::fit_tunability(&mut out, &curves, window.as_deref())?,
        Command::Report { tunability, lever } => c::report(&mut out, &tunability, lever.as_deref())?,
        Command::Reproduce { fig, readout } => reproduce::run(&ctx, &mut out, fig, &readout)?,
    }
    let args: Vec<String> = std::env::args().skip(1).collect();
    output::RunManifest::write(&out, name, &ctx.config_label, args, ctx.seed, started)?;
    Ok(())
}
