mod bench;
mod nodes;
mod offline;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use roboplat_core::device::{DeviceConfig, Plant};
use roboplat_core::transport::{Endpoint, ShapingParams};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(
    name = "roboplat",
    version,
    about = "Sensor dataset tools, teleoperation nodes and link benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sampling-period statistics per sensor stream.
    Stats {
        session: PathBuf,
        /// Also write the statistics as CSV.
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
    },
    /// Resample the gyroscope onto accelerometer timestamps.
    Align {
        session: PathBuf,
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        imu_id: u32,
    },
    /// Write an EuRoC MAV directory tree.
    ExportEuroc {
        session: PathBuf,
        out: PathBuf,
        /// Camera id; defaults to the first camera present.
        #[arg(long)]
        cam: Option<String>,
        #[arg(long, default_value_t = 0)]
        imu_id: u32,
    },
    /// Check a session for format and consistency errors.
    Validate { session: PathBuf },
    /// Run a simulated microcontroller.
    Device {
        #[arg(long, value_name = "ENDPOINT")]
        listen: Endpoint,
        #[command(flatten)]
        sim: SimArgs,
        /// Telemetry push period; 0 disables pushes.
        #[arg(long, default_value = "50ms", value_parser = humantime::parse_duration)]
        telemetry: Duration,
    },
    /// Relay between a control station and a device.
    Bridge {
        #[arg(long, value_name = "ENDPOINT")]
        server: Endpoint,
        /// Device endpoint, or `spawn-sim` for an in-process simulator.
        #[arg(long, value_name = "ENDPOINT|spawn-sim")]
        device: DeviceArg,
        /// Record ADC samples into a new session directory.
        #[arg(long, value_name = "DIR")]
        record: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        poll_ms: u64,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Accept one bridge, verify it and drive it from a UI or a script.
    Station {
        #[arg(long, value_name = "ENDPOINT")]
        listen: Endpoint,
        /// JSON-lines UI gateway endpoint.
        #[arg(long, value_name = "ENDPOINT")]
        ui: Option<Endpoint>,
        /// Timed JSON-lines commands; the station exits when done.
        #[arg(long, value_name = "FILE")]
        script: Option<PathBuf>,
        /// Time to keep the link up after the last scripted command.
        #[arg(long, default_value = "0s", value_parser = humantime::parse_duration)]
        hold: Duration,
        /// Give up if no bridge is verified within this time (script mode).
        #[arg(long, default_value = "60s", value_parser = humantime::parse_duration)]
        wait: Duration,
    },
    /// Latency and throughput benchmark against a device.
    Bench {
        /// Device endpoint, or `spawn-sim` for an in-process simulator.
        #[arg(long, value_name = "ENDPOINT|spawn-sim")]
        connect: DeviceArg,
        /// Link shaping, e.g. `delay=5ms,bw=8KiB/s,jitter=1ms,seed=3`.
        #[arg(long, default_value = "delay=0")]
        shape: ShapingParams,
        #[arg(long, value_delimiter = ',', default_value = "64,256,512,1024")]
        sizes: Vec<usize>,
        /// Send each buffer as a train of 64-byte frames.
        #[arg(long)]
        chunked: bool,
        /// Also write the report as CSV.
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
        /// Run on the virtual clock (requires spawn-sim).
        #[arg(long = "virtual")]
        virtual_clock: bool,
        /// Column label in the report.
        #[arg(long, default_value = "link")]
        label: String,
        #[arg(long, default_value_t = 10)]
        rounds: usize,
        #[arg(long, default_value_t = 100)]
        probes: usize,
        #[arg(long, default_value_t = 1000)]
        packets: usize,
        #[arg(long, default_value = "2s", value_parser = humantime::parse_duration)]
        timeout: Duration,
    },
}

/// Simulated device parameters.
#[derive(Args, Clone, Copy)]
struct SimArgs {
    /// ADC sample rate, Hz.
    #[arg(long, default_value_t = 100)]
    rate: u16,
    /// ADC resolution.
    #[arg(long, default_value_t = 10)]
    bits: u8,
    #[arg(long, default_value_t = 2)]
    channels: u8,
    #[arg(long, default_value = "car")]
    plant: Plant,
}

impl SimArgs {
    fn config(&self) -> DeviceConfig {
        DeviceConfig {
            channels: self.channels,
            resolution_bits: self.bits,
            sample_rate_hz: self.rate,
            plant: self.plant,
        }
    }
}

#[derive(Clone, Debug)]
enum DeviceArg {
    Spawn,
    Endpoint(Endpoint),
}

impl std::str::FromStr for DeviceArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "spawn-sim" {
            return Ok(DeviceArg::Spawn);
        }
        s.parse().map(DeviceArg::Endpoint).map_err(|e| format!("{e}"))
    }
}

fn wall_runtime() -> anyhow::Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Stats { session, csv } => offline::stats(&session, csv.as_deref()),
        Command::Align {
            session,
            output,
            imu_id,
        } => offline::align(&session, &output, imu_id),
        Command::ExportEuroc {
            session,
            out,
            cam,
            imu_id,
        } => offline::export(&session, &out, cam, imu_id),
        Command::Validate { session } => offline::validate(&session),
        Command::Device {
            listen,
            sim,
            telemetry,
        } => wall_runtime().and_then(|rt| rt.block_on(nodes::device(listen, sim.config(), telemetry))),
        Command::Bridge {
            server,
            device,
            record,
            poll_ms,
            sim,
        } => wall_runtime().and_then(|rt| {
            rt.block_on(nodes::bridge(
                server,
                device,
                record,
                Duration::from_millis(poll_ms),
                sim.config(),
            ))
        }),
        Command::Station {
            listen,
            ui,
            script,
            hold,
            wait,
        } => wall_runtime().and_then(|rt| rt.block_on(nodes::station(listen, ui, script, hold, wait))),
        Command::Bench {
            connect,
            shape,
            sizes,
            chunked,
            csv,
            virtual_clock,
            label,
            rounds,
            probes,
            packets,
            timeout,
        } => bench::run(bench::BenchArgs {
            device: connect,
            shape,
            sizes,
            chunked,
            csv,
            virtual_clock,
            label,
            options: roboplat_core::commbench::BenchOptions {
                rounds,
                probes_per_round: probes,
                packets,
                timeout,
            },
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
