// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CAMPAIGN_FIXTURE: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/../core/fixtures/campaign_measurements.csv"
);

fn loralink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loralink"))
        .args(args)
        .env_remove("UPLINK_API_KEY")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Non-comment lines of a command's output.
fn body(o: &Output) -> Vec<String> {
    stdout(o)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn value(lines: &[String], key: &str) -> f64 {
    lines
        .iter()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing"))
        .parse()
        .unwrap()
}

const LINK: [&str; 10] = [
    "--pt", "20", "--gt", "5.15", "--gr", "5.15", "--d", "5000", "--f", "433e6",
];

#[test]
fn budget_from_flags() {
    let mut args = vec!["budget", "--rssi", "-92.8", "--snr", "8.4"];
    args.extend(LINK);
    let out = loralink(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let lines = body(&out);
    assert!((value(&lines, "excess_db") - 24.532).abs() <= 0.05);
    assert!((value(&lines, "fsl_db") - 99.151).abs() <= 0.0005);
    // three decimals everywhere
    for l in &lines {
        let (_, v) = l.split_once('=').unwrap();
        assert_eq!(v.split_once('.').unwrap().1.len(), 3, "{l}");
    }
}

#[test]
fn budget_from_fixture_cell_matches_flags() {
    let mut direct = vec!["budget", "--rssi", "-92.8", "--snr", "8.4"];
    direct.extend(LINK);
    let mut cell = vec!["budget", "--cell", "sf=7,bw_khz=10.4", "--fixture", CAMPAIGN_FIXTURE];
    cell.extend(LINK);
    let a = loralink(&direct);
    let b = loralink(&cell);
    assert!(b.status.success(), "{}", stderr(&b));
    assert_eq!(body(&a), body(&b));
    assert!(stdout(&b).contains("# param.cell=sf=7,bw_khz=10.4"));
}

#[test]
fn budget_missing_distance_is_usage_error() {
    let out = loralink(&[
        "budget", "--rssi", "-92.8", "--snr", "8.4", "--pt", "20", "--gt", "5.15", "--gr", "5.15", "--f", "433e6",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--d"));
}

#[test]
fn budget_rejects_fractional_hz() {
    let mut args = vec!["budget", "--rssi", "-92.8", "--snr", "8.4"];
    args.extend(&LINK[..8]);
    args.extend(["--f", "433.5"]);
    assert_eq!(loralink(&args).status.code(), Some(2));
}

#[test]
fn reconstruct_within_loose_tolerance() {
    let out = loralink(&["reconstruct", "--tolerance", "0.1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let lines = body(&out);
    assert_eq!(lines[0], "bw_khz,sf7,sf8,sf9,sf10,sf11,sf12");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("10.4,24.53"));
    assert!(stdout(&out).contains("# result=pass"));
}

#[test]
fn reconstruct_default_tolerance_reports_the_worst_cell() {
    let out = loralink(&["reconstruct"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("sf=7 bw_khz=62.5"), "{}", stderr(&out));
    // output is still written in full
    assert!(stdout(&out).contains("# result=fail"));
}

#[test]
fn reconstruct_tight_tolerance_fails() {
    let out = loralink(&["reconstruct", "--tolerance", "0.0001"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn reconstruct_perturbed_fixture_names_cell() {
    let text = fs::read_to_string(CAMPAIGN_FIXTURE).unwrap();
    let perturbed = text.replacen("9,125,4,8,-108,", "9,125,4,8,-107,", 1);
    assert_ne!(text, perturbed, "fixture row not found");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("perturbed.csv");
    fs::write(&path, perturbed).unwrap();
    let out = loralink(&["reconstruct", "--tolerance", "0.1", "--fixture", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("sf=9 bw_khz=125"), "{}", stderr(&out));
}

#[test]
fn reconstruct_bad_fixture_is_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(
        &path,
        "sf,bw_khz,cr_num,cr_den,rssi_dbm,snr_db,loss_pct\n7,10.4,4,8,-92.8,8.4,101\n",
    )
    .unwrap();
    let out = loralink(&["reconstruct", "--fixture", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn recommend_defaults() {
    let out = loralink(&["recommend"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(body(&out)[0], "sf=8 bw_khz=62.5 cr=4/8");
}

#[test]
fn recommend_narrow_bands() {
    let out = loralink(&["recommend", "--min-bw-khz", "10.4"]);
    assert!(body(&out)[0].starts_with("sf=8 bw_khz=10.4 "));
}

#[test]
fn recommend_loss_out_of_range() {
    assert_eq!(loralink(&["recommend", "--max-loss", "101"]).status.code(), Some(2));
}

#[test]
fn recommend_infeasible_is_validation_error() {
    let out = loralink(&["recommend", "--min-bw-khz", "1000"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("bandwidth"));
}

#[test]
fn simulate_hand_schedule() {
    let args = [
        "simulate",
        "--nodes",
        "2",
        "--slot-s",
        "1",
        "--duration-s",
        "10",
        "--seed",
        "7",
        "--drop",
        "0,0",
    ];
    let out = loralink(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("node 0001 sent=5 received=5 lost=0"));
    assert!(text.contains("node 0002 sent=5 received=5 lost=0"));
    assert_eq!(text, stdout(&loralink(&args)));
}

#[test]
fn simulate_drop_from_fixture() {
    let out = loralink(&[
        "simulate",
        "--nodes",
        "1",
        "--cell",
        "sf=7,bw_khz=10.4",
        "--payload-bytes",
        "1",
        "--duration-s",
        "2000",
        "--drop-from-fixture",
        CAMPAIGN_FIXTURE,
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("# param.drop.0001=0.54"));
    let node = text.lines().find(|l| l.starts_with("node 0001")).unwrap();
    let field = |k: &str| -> f64 {
        node.split_whitespace()
            .find_map(|p| p.strip_prefix(&format!("{k}=")))
            .unwrap()
            .parse()
            .unwrap()
    };
    let n = field("sent");
    assert!(n >= 1000.0, "only {n} frames");
    let p = field("lost") / n;
    assert!((p - 0.54).abs() <= 3.0 * (0.54 * 0.46 / n).sqrt(), "loss {p}");
}

#[test]
fn simulate_report_file_and_uplink_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.txt");
    let log = dir.path().join("uplink.log");
    let out = loralink(&[
        "simulate",
        "--nodes",
        "2",
        "--slot-s",
        "1",
        "--duration-s",
        "4",
        "--drop",
        "0",
        "--output",
        report.to_str().unwrap(),
        "--uplink-log",
        log.to_str().unwrap(),
        "--map",
        "0001=K1:1",
        "--map",
        "0002=K2:2",
        "--epoch",
        "2024-03-01T12:00:00Z",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let sim_log = fs::read_to_string(&log).unwrap();

    let out = loralink(&[
        "uplink",
        "--report",
        report.to_str().unwrap(),
        "--map",
        "0001=K1:1",
        "--map",
        "0002=K2:2",
        "--epoch",
        "2024-03-01T12:00:00Z",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let strip = |s: &str| -> Vec<String> { s.lines().filter(|l| !l.starts_with('#')).map(str::to_string).collect() };
    let lines = strip(&stdout(&out));
    assert_eq!(lines, strip(&sim_log));
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("2024-03-01T12:00:"));
    assert!(lines[0].contains(" UPLINK GET /update?api_key=K1&field1="));
    assert!(lines[1].contains("api_key=K2&field2="));
}

#[test]
fn uplink_send_without_feature_or_key_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.txt");
    fs::write(
        &report,
        "0 rx_ok 0001 seq=0 value=5\nnode 0001 sent=1 received=1 lost=0 loss_pct=0.000\n",
    )
    .unwrap();
    let out = loralink(&["uplink", "--report", report.to_str().unwrap(), "--send"]);
    // no key in the environment (and possibly no http support): usage error, no network
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn uplink_malformed_report_is_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.txt");
    fs::write(&report, "garbage line here\n").unwrap();
    let out = loralink(&["uplink", "--report", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sweep_rssi_matches_fixture() {
    let out = loralink(&["sweep", "--metric", "rssi", "--fixture", CAMPAIGN_FIXTURE]);
    assert!(out.status.success(), "{}", stderr(&out));
    let lines = body(&out);
    assert_eq!(lines[0], "sf,bw_khz,rssi_dbm");
    assert_eq!(lines.len(), 37);
    assert!(lines.contains(&"7,10.4,-92.8".to_string()));
    assert!(lines.contains(&"12,500,-106.8".to_string()));
}

#[test]
fn sweep_excess_matches_reconstruct() {
    let sweep = body(&loralink(&["sweep", "--metric", "excess"]));
    let grid = body(&loralink(&["reconstruct", "--tolerance", "1"]));
    assert_eq!(sweep.len(), 37);
    let bws = ["10.4", "20.8", "62.5", "125", "250", "500"];
    for line in &sweep[1..] {
        let parts: Vec<&str> = line.split(',').collect();
        let sf: usize = parts[0].parse().unwrap();
        let row = bws.iter().position(|b| *b == parts[1]).unwrap() + 1;
        let cell = grid[row].split(',').nth(sf - 6).unwrap();
        assert_eq!(parts[2], cell, "{line}");
    }
}

#[test]
fn sweep_unknown_metric_lists_choices() {
    let out = loralink(&["sweep", "--metric", "latency"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    for m in ["rssi", "snr", "loss", "esp", "path_loss", "excess"] {
        assert!(err.contains(m), "{err}");
    }
}

#[test]
fn output_flag_writes_file_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let out = loralink(&[
        "sweep",
        "--metric",
        "snr",
        "--seed",
        "9",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# subcommand=sweep\n# seed=9\n"));
    assert!(text.contains(&format!("# output={}", path.display())));
    assert!(Path::new(&path).exists());
}

#[test]
fn help_documents_exit_codes() {
    let out = loralink(&["--help"]);
    let text = stdout(&out);
    for code in ["0  success", "2  usage", "3  validation", "4  tolerance"] {
        assert!(text.contains(code), "{text}");
    }
}

#[test]
fn book_transcripts_match_binary() {
    let chapter = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../book/src/cli.md")).unwrap();
    let mut args = vec!["budget", "--rssi", "-92.8", "--snr", "8.4"];
    args.extend(LINK);
    for line in body(&loralink(&args)) {
        assert!(chapter.contains(&format!("\n{line}\n")), "{line} missing from the book");
    }
    assert!(chapter.contains(&format!("\n{}\n", body(&loralink(&["recommend"]))[0])));
    let sim = stdout(&loralink(&[
        "simulate",
        "--nodes",
        "2",
        "--slot-s",
        "1",
        "--duration-s",
        "10",
        "--seed",
        "7",
        "--drop",
        "0,0",
    ]));
    for line in sim.lines().filter(|l| l.starts_with("node ")) {
        assert!(chapter.contains(line), "{line} missing from the book");
    }
}
