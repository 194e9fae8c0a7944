mod common;

use std::time::Duration;

use common::{rig, rig_with};
use roboplat_core::bridge::BridgeConfig;
use roboplat_core::clock::Clock;
use roboplat_core::device::{DeviceConfig, ServeOptions};
use roboplat_core::station::{start_station, StationOptions};
use roboplat_core::transport::{connect, Channel, Endpoint, ShapingParams};
use serde_json::{json, Value};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader, Lines, ReadHalf, WriteHalf};

struct Session {
    lines: Lines<BufReader<ReadHalf<Channel>>>,
    w: WriteHalf<Channel>,
}

impl Session {
    async fn open(ep: &Endpoint) -> Session {
        let (r, w) = tokio::io::split(connect(ep).await.unwrap());
        Session {
            lines: BufReader::new(r).lines(),
            w,
        }
    }

    async fn send(&mut self, line: &str) {
        self.w.write_all(line.as_bytes()).await.unwrap();
        self.w.write_all(b"\n").await.unwrap();
    }

    async fn next(&mut self) -> Value {
        let line = self.lines.next_line().await.unwrap().expect("session open");
        serde_json::from_str(&line).unwrap()
    }

    /// Next event of `kind`, skipping others.
    async fn next_of(&mut self, kind: &str) -> Value {
        loop {
            let v = self.next().await;
            if v["type"] == kind {
                return v;
            }
        }
    }
}

#[tokio::test(start_paused = true)]
async fn status_is_first_and_commands_are_refused_before_verification() {
    let clock = Clock::virtual_time();
    let station = start_station(
        &Endpoint::pipe(common::unique_label("ctl")),
        Some(&Endpoint::pipe(common::unique_label("ui"))),
        clock,
        StationOptions::default(),
    )
    .await
    .unwrap();
    let mut s = Session::open(station.ui_endpoint().unwrap()).await;
    assert_eq!(
        s.next().await,
        json!({"type":"status","connected":false,"verified":false})
    );
    s.send(r#"{"type":"digital","line":0,"value":1}"#).await;
    let ack = s.next().await;
    assert_eq!(ack["type"], "ack");
    assert_eq!(ack["accepted"], false);
    assert_eq!(ack["reason"], "no client connected");
    assert!(station.command_log().is_empty());
}

#[tokio::test(start_paused = true)]
async fn commands_flow_to_the_device_and_telemetry_flows_back() {
    let r = rig(
        DeviceConfig::default(),
        BridgeConfig::default(),
        ShapingParams::default(),
    )
    .await;
    let mut s = Session::open(r.station.ui_endpoint().unwrap()).await;
    loop {
        if s.next_of("status").await["verified"] == true {
            break;
        }
    }
    s.send(r#"{"type":"digital","line":1,"value":1}"#).await;
    assert_eq!(s.next_of("ack").await, json!({"type":"ack","accepted":true}));
    s.send(r#"{"type":"digital","line":0,"value":1}"#).await;
    assert_eq!(s.next_of("ack").await, json!({"type":"ack","accepted":true}));
    s.send(r#"{"type":"pwm","values":[500,500,500,500]}"#).await;
    assert_eq!(s.next_of("ack").await, json!({"type":"ack","accepted":true}));
    r.clock.sleep(Duration::from_millis(500)).await;
    let t = s.next_of("telemetry").await;
    let keys: Vec<&str> = t.as_object().unwrap().keys().map(String::as_str).collect();
    let mut expected = ["type", "t_ns", "car_pos_m", "pwm", "adc", "attitude"];
    expected.sort();
    let mut got = keys.clone();
    got.sort();
    assert_eq!(got, expected);
    assert!(t["car_pos_m"].as_f64().unwrap() > 0.0);
    assert_eq!(t["pwm"], json!([500, 500, 500, 500]));
    assert_eq!(t["adc"].as_array().unwrap().len(), 2);
    assert!(t["adc"][0]["ch"].is_u64() && t["adc"][0]["v"].is_u64());
}

#[tokio::test(start_paused = true)]
async fn malformed_input_gets_an_error_and_the_session_survives() {
    let r = rig(
        DeviceConfig::default(),
        BridgeConfig::default(),
        ShapingParams::default(),
    )
    .await;
    r.station.wait_verified().await;
    let mut s = Session::open(r.station.ui_endpoint().unwrap()).await;
    for bad in ["{nope", r#"{"type":"warp"}"#, r#"{"type":"pwm","values":[1]}"#] {
        s.send(bad).await;
        assert_eq!(s.next_of("error").await["type"], "error");
    }
    s.send(r#"{"type":"pwm","values":[1500,0,0,0]}"#).await;
    let ack = s.next_of("ack").await;
    assert_eq!(ack["accepted"], false);
    assert!(ack["reason"].as_str().unwrap().contains("1500"));
    s.send(r#"{"type":"digital","line":0,"value":1}"#).await;
    assert_eq!(s.next_of("ack").await["accepted"], true);
}

#[tokio::test(start_paused = true)]
async fn telemetry_never_exceeds_twenty_hertz_per_session() {
    // Device pushes at 100 Hz; each session must be thinned to 20 Hz.
    let serve_opts = ServeOptions {
        telemetry_period: Some(Duration::from_millis(10)),
    };
    let r = rig_with(
        DeviceConfig::default(),
        BridgeConfig::default(),
        ShapingParams::default(),
        serve_opts,
    )
    .await;
    r.station.wait_verified().await;
    let ep = r.station.ui_endpoint().unwrap();
    let watch = |mut s: Session| async move {
        let t0 = r.clock.now();
        let mut stamps = Vec::new();
        while r.clock.now() - t0 < Duration::from_secs(2) {
            s.next_of("telemetry").await;
            stamps.push(r.clock.now());
        }
        stamps
    };
    let (a, b) = tokio::join!(watch(Session::open(ep).await), watch(Session::open(ep).await));
    for stamps in [a, b] {
        for w in stamps.windows(2) {
            assert!(w[1] - w[0] >= Duration::from_millis(50), "{:?}", w[1] - w[0]);
        }
        assert!((38..=42).contains(&stamps.len()), "{}", stamps.len());
    }
}

#[tokio::test(start_paused = true)]
async fn latency_test_reports_a_bench_result() {
    let uplink = ShapingParams::delay(Duration::from_millis(2));
    let r = rig(DeviceConfig::default(), BridgeConfig::default(), uplink).await;
    r.station.wait_verified().await;
    let mut s = Session::open(r.station.ui_endpoint().unwrap()).await;
    s.send(r#"{"type":"latency_test","sizes":[64]}"#).await;
    let res = s.next_of("bench_result").await;
    let latency = res["latency_ms"].as_f64().unwrap();
    assert!((latency - 4.0).abs() < 0.1, "{latency}");
    assert_eq!(res["lost"], 0);
    assert_eq!(res["throughput"][0]["size"], 64);
}
