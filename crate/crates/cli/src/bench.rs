//! `roboplat bench`: handshake with a device, then run the benchmarks.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use roboplat_core::clock::Clock;
use roboplat_core::commbench::{report_csv, report_table, run_bench, verify_peer, BenchOptions};
use roboplat_core::device::{serve, Device, DeviceConfig, ServeOptions};
use roboplat_core::protocol::FramedLink;
use roboplat_core::transport::{connect, pipe_pair, shape, ShapingParams};

use crate::DeviceArg;

pub struct BenchArgs {
    pub device: DeviceArg,
    pub shape: ShapingParams,
    pub sizes: Vec<usize>,
    pub chunked: bool,
    pub csv: Option<PathBuf>,
    pub virtual_clock: bool,
    pub label: String,
    pub options: BenchOptions,
}

pub fn run(args: BenchArgs) -> anyhow::Result<ExitCode> {
    let rt = if args.virtual_clock {
        if !matches!(args.device, DeviceArg::Spawn) {
            bail!("--virtual runs only against --connect spawn-sim");
        }
        tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .start_paused(true)
            .build()?
    } else {
        crate::wall_runtime()?
    };
    rt.block_on(bench(args))
}

async fn bench(args: BenchArgs) -> anyhow::Result<ExitCode> {
    let clock = if args.virtual_clock {
        Clock::virtual_time()
    } else {
        Clock::wall()
    };
    let channel = match &args.device {
        DeviceArg::Spawn => {
            let device = Device::spawn(DeviceConfig::default(), clock)?;
            let (near, far) = pipe_pair();
            tokio::spawn(async move { serve(far, &device, ServeOptions::default(), clock).await });
            near
        }
        DeviceArg::Endpoint(ep) => connect(ep).await?,
    };
    tracing::info!(shape = %args.shape, "benchmarking {}", args.label);
    let mut link = FramedLink::new(shape(channel, args.shape, clock));
    verify_peer(&mut link, clock, args.options.timeout).await?;
    let result = run_bench(
        &mut link,
        &args.label,
        &args.sizes,
        args.chunked,
        clock,
        &args.options,
    )
    .await?;
    let results = [result];
    print!("{}", report_table(&results));
    if let Some(path) = &args.csv {
        std::fs::write(path, report_csv(&results)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}
