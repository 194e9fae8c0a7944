use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use roboplat_core::dataset::{open_session, CameraIndexEntry, ImuSample, SensorRecord, Stream};

fn roboplat() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_roboplat"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    roboplat().args(args).output().expect("spawn roboplat")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Kills the child if a test fails before reaping it.
struct Reaped(Child);

impl Drop for Reaped {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn wait_with_deadline(child: &mut Child, limit: Duration) -> std::process::ExitStatus {
    let start = Instant::now();
    loop {
        if let Some(status) = child.try_wait().unwrap() {
            return status;
        }
        assert!(start.elapsed() < limit, "process still running after {limit:?}");
        std::thread::sleep(Duration::from_millis(20));
    }
}

fn free_port() -> u16 {
    std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

fn imu(t: i64, v: f64) -> ImuSample {
    ImuSample {
        timestamp_ns: t,
        axis_values: [v, 2.0 * v, -v],
        bias: None,
        sensor_id: 0,
    }
}

/// Gyro at 0,10,20 ms; accel at 5,15,25 ms; one camera frame.
fn sample_session(dir: &Path) -> PathBuf {
    let root = dir.join("session");
    let cam = Stream::Camera("0".into());
    let mut w = open_session(&root, &[Stream::Gyro, Stream::Accel, cam.clone()]).unwrap();
    for (k, v) in [(0, 0.0), (1, 1.0), (2, 2.0)] {
        w.append(&Stream::Gyro, &SensorRecord::Gyro(imu(k * 10_000_000, v)))
            .unwrap();
        w.append(
            &Stream::Accel,
            &SensorRecord::Accel(imu(k * 10_000_000 + 5_000_000, 9.0)),
        )
        .unwrap();
    }
    w.append(
        &cam,
        &SensorRecord::Camera(CameraIndexEntry {
            timestamp_ns: 7,
            image_path: "images/a.png".into(),
        }),
    )
    .unwrap();
    w.finish().unwrap();
    std::fs::write(Stream::camera_dir(&root, "0").join("images/a.png"), b"img").unwrap();
    root
}

#[test]
fn offline_tools_on_a_session() {
    let tmp = tempfile::tempdir().unwrap();
    let root = sample_session(tmp.path());
    let s = root.to_str().unwrap();

    let csv = tmp.path().join("stats.csv");
    let o = run(&["stats", s, "--csv", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("gyro"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("# sensor,mean_period_s,period_std_s,num_samples,duration_s\n"));
    assert!(text.contains("\ngyro,0.010000,0.000000,3,0.020\n"), "{text}");

    let aligned = tmp.path().join("aligned.csv");
    let o = run(&["align", s, "-o", aligned.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o).trim(), "2 rows, 1 accel samples dropped");
    let rows: Vec<String> = std::fs::read_to_string(&aligned)
        .unwrap()
        .lines()
        .skip(1)
        .map(str::to_string)
        .collect();
    assert_eq!(
        rows,
        [
            "5000000,0.5,1.0,-0.5,9.0,18.0,-9.0",
            "15000000,1.5,3.0,-1.5,9.0,18.0,-9.0"
        ]
    );

    let out = tmp.path().join("euroc");
    let o = run(&["export-euroc", s, out.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("1 images copied"));
    let imu_csv = std::fs::read_to_string(out.join("mav0/imu0/data.csv")).unwrap();
    assert_eq!(imu_csv.lines().skip(1).collect::<Vec<_>>(), rows);
    assert!(out.join("mav0/cam0/data/a.png").is_file());

    let o = run(&["validate", s]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o).trim(), "0 errors, 0 warnings");
}

#[test]
fn validate_fails_on_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let root = sample_session(tmp.path());
    std::fs::remove_file(Stream::camera_dir(&root, "0").join("images/a.png")).unwrap();
    let o = run(&["validate", root.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(
        out.contains("data.txt:2: image images/a.png does not exist"),
        "{out}"
    );
    assert!(out.contains("1 errors"));

    let o = run(&["validate", tmp.path().join("missing").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn virtual_bench_reports_the_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("b.csv");
    let o = run(&[
        "bench",
        "--connect",
        "spawn-sim",
        "--virtual",
        "--shape",
        "delay=5ms",
        "--sizes",
        "64,1024",
        "--label",
        "wifi",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(
        std::fs::read_to_string(&csv).unwrap(),
        "quantity,buffer_size,wifi\nlatency_ms,18,10.000\nthroughput_kibps,64,6.250\nthroughput_kibps,1024,100.000\n"
    );
    assert!(stdout(&o).contains("Latency (ms)"));
}

#[test]
fn bad_arguments_are_rejected() {
    let o = run(&["bench", "--connect", "127.0.0.1:9", "--virtual"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--virtual"));
    let o = run(&["bench", "--connect", "spawn-sim", "--shape", "bw=0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["device", "--listen", "pipe:x", "--plant", "boat"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bridge_exit_code_for_unreachable_station() {
    let port = free_port().to_string();
    let server = format!("127.0.0.1:{port}");
    let o = run(&["bridge", "--server", &server, "--device", "spawn-sim"]);
    assert_eq!(o.status.code(), Some(5), "{o:?}");
}

#[test]
fn device_process_serves_a_tcp_bench() {
    let port = free_port();
    let ep = format!("127.0.0.1:{port}");
    let mut device = Reaped(
        roboplat()
            .args(["device", "--listen", &ep, "--telemetry", "0"])
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap(),
    );
    let start = Instant::now();
    while TcpStream::connect(&ep).is_err() {
        assert!(start.elapsed() < Duration::from_secs(10), "device never listened");
        std::thread::sleep(Duration::from_millis(20));
    }
    // The probe connection above occupied the single slot; let it clear.
    std::thread::sleep(Duration::from_millis(100));
    let o = run(&[
        "bench",
        "--connect",
        &ep,
        "--rounds",
        "1",
        "--probes",
        "20",
        "--packets",
        "20",
        "--sizes",
        "64",
    ]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("0 probes lost"), "{}", stdout(&o));
    assert!(device.0.try_wait().unwrap().is_none());
}

/// Reads `control <ep>` and `ui <ep>` from a station's stdout.
fn station_endpoints(child: &mut Child) -> (BufReader<std::process::ChildStdout>, String, Option<String>) {
    let mut out = BufReader::new(child.stdout.take().unwrap());
    let mut line = String::new();
    out.read_line(&mut line).unwrap();
    let control = line
        .trim()
        .strip_prefix("control ")
        .expect("control line")
        .to_string();
    line.clear();
    let ui = match out.read_line(&mut line) {
        Ok(n) if n > 0 && line.starts_with("ui ") => Some(line.trim()[3..].to_string()),
        _ => None,
    };
    (out, control, ui)
}

#[test]
fn scripted_station_drives_a_bridge_over_tcp() {
    let tmp = tempfile::tempdir().unwrap();
    let script = tmp.path().join("drive.jsonl");
    std::fs::write(
        &script,
        "# forward, reverse, stop\n\
         {\"at_ms\":0,\"type\":\"digital\",\"line\":1,\"value\":1}\n\
         {\"at_ms\":0,\"type\":\"digital\",\"line\":0,\"value\":1}\n\
         {\"at_ms\":300,\"type\":\"digital\",\"line\":1,\"value\":0}\n\
         {\"at_ms\":600,\"type\":\"digital\",\"line\":0,\"value\":0}\n",
    )
    .unwrap();
    let listen = format!("127.0.0.1:{}", free_port());
    let ui = format!("127.0.0.1:{}", free_port());
    let mut station = Reaped(
        roboplat()
            .args(["station", "--listen", &listen, "--ui", &ui, "--script"])
            .arg(&script)
            .args(["--hold", "300ms", "--wait", "20s"])
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap(),
    );
    let (mut station_out, control, ui) = station_endpoints(&mut station.0);

    let mut ui = TcpStream::connect(ui.expect("ui endpoint")).unwrap();
    ui.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
    let mut first = String::new();
    BufReader::new(ui.try_clone().unwrap())
        .read_line(&mut first)
        .unwrap();
    assert_eq!(
        first,
        "{\"type\":\"status\",\"connected\":false,\"verified\":false}\n"
    );

    let record = tmp.path().join("rec");
    let bridge = roboplat()
        .args([
            "bridge",
            "--server",
            &control,
            "--device",
            "spawn-sim",
            "--record",
        ])
        .arg(&record)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut bridge = Reaped(bridge);

    let status = wait_with_deadline(&mut station.0, Duration::from_secs(30));
    assert!(status.success());
    let mut rest = String::new();
    station_out.read_to_string(&mut rest).unwrap();
    assert!(rest.contains("script done: 4 commands sent"), "{rest}");

    let status = wait_with_deadline(&mut bridge.0, Duration::from_secs(10));
    assert!(status.success());
    let mut summary = String::new();
    bridge
        .0
        .stdout
        .take()
        .unwrap()
        .read_to_string(&mut summary)
        .unwrap();
    assert!(summary.contains("UpstreamLost"), "{summary}");
    assert!(summary.contains("4 commands forwarded"), "{summary}");

    let o = run(&["validate", record.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    assert!(std::fs::read_to_string(record.join("calibration/device.txt"))
        .unwrap()
        .contains("resolution_bits: 10"));
    let _ = ui.write_all(b"\n");
}
