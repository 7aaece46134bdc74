use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use diqkd::bits::{pack_le, unpack_le};
use diqkd::extract::{rs_hadamard_encode, ExtractorConfig};
use diqkd::protocol::SessionResult;
use diqkd::rng::stream;
use rand::Rng;
use serde::Deserialize;
use tempfile::TempDir;

fn diqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diqkd")).args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn simulate_is_byte_identical_for_a_seed() {
    let dir = TempDir::new().unwrap();
    let (p1, p2) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for p in [&p1, &p2] {
        let out = diqkd(&["simulate", "--m", "30000", "--bell-size", "8000", "--seed", "11", "--out", path_str(p)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1);
    }
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    let other = dir.path().join("c.json");
    diqkd(&["simulate", "--m", "30000", "--bell-size", "8000", "--seed", "12", "--out", path_str(&other)]);
    assert_ne!(std::fs::read(&p1).unwrap(), std::fs::read(&other).unwrap());
}

#[test]
fn session_json_round_trips() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("s.json");
    diqkd(&["simulate", "--m", "30000", "--bell-size", "8000", "--seed", "3", "--out", path_str(&p)]);
    let text = std::fs::read_to_string(&p).unwrap();
    let session = SessionResult::from_json(&text).unwrap();
    assert_eq!(session.to_json().unwrap(), text);
    assert!(!session.aborted());
    assert_eq!(session.alice_key, session.bob_key);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["m", "x", "y", "a", "b", "bell_set", "check_set", "eta_observed", "aborted", "abort_reason", "leakage_bits", "key_len", "alice_key", "bob_key", "messages"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn deterministic_device_aborts_with_exit_2() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("d.json");
    let out = diqkd(&["simulate", "--device", "deterministic", "--m", "6000", "--bell-size", "1105", "--out", path_str(&p)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("BELL_TEST"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(v["abort_reason"], "BELL_TEST");
    assert_eq!(v["aborted"], true);
}

#[test]
fn malformed_inputs_exit_1() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[protocol]\nm = \"many\"\n").unwrap();
    let out = diqkd(&["simulate", "--config", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.toml"));

    std::fs::write(&bad, "[protocol]\nunknown_key = 1\n").unwrap();
    assert_eq!(diqkd(&["simulate", "--config", path_str(&bad)]).status.code(), Some(1));
    assert_eq!(diqkd(&["simulate", "--config", "/nonexistent/cfg.toml"]).status.code(), Some(1));
    assert_eq!(diqkd(&["simulate", "--eta", "2"]).status.code(), Some(1));
    assert_eq!(diqkd(&["simulate", "--device", "oracle"]).status.code(), Some(1));
    assert_eq!(diqkd(&["simulate", "--m", "lots"]).status.code(), Some(1));
    assert_eq!(diqkd(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 5\n[protocol]\nm = 30000\nbell_size = 8000\n[device]\nname = \"deterministic\"\n").unwrap();
    assert_eq!(diqkd(&["simulate", "--config", path_str(&cfg)]).status.code(), Some(2));
    let out = diqkd(&["simulate", "--config", path_str(&cfg), "--device", "honest"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("m=30000 bell=8000"));
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepRow {
    noise: f64,
    eta: f64,
    abort_rate: f64,
    mean_key_len: f64,
    per_bit_guess_rate: f64,
}

fn header(p: &Path) -> Vec<String> {
    csv::Reader::from_path(p).unwrap().headers().unwrap().iter().map(String::from).collect()
}

#[test]
fn sweep_csv_and_abort_monotonicity() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("sweep.csv");
    let out = diqkd(&["sweep", "--m", "20000", "--bell-size", "4000", "--trials", "40", "--seed", "1", "--out", path_str(&p)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(header(&p), ["noise", "eta", "abort_rate", "mean_key_len", "per_bit_guess_rate"]);
    let rows: Vec<SweepRow> = csv::Reader::from_path(&p).unwrap().deserialize().collect::<Result<_, _>>().unwrap();
    assert_eq!(rows.iter().map(|r| r.noise).collect::<Vec<_>>(), [0.0, 0.005, 0.01, 0.02]);
    for w in rows.windows(2) {
        let sigma = |p: f64| (p * (1.0 - p) / 40.0).sqrt();
        let slack = 3.0 * (sigma(w[0].abort_rate).powi(2) + sigma(w[1].abort_rate).powi(2)).sqrt();
        assert!(w[1].abort_rate + slack >= w[0].abort_rate, "{rows:?}");
        assert_eq!(w[0].eta, 0.005);
    }
    assert!(rows[0].mean_key_len > 0.0);
    assert!((0.4..0.6).contains(&rows[0].per_bit_guess_rate));

    for grid in ["", " , "] {
        let out = diqkd(&["sweep", "--noise-grid", grid, "--out", path_str(&p)]);
        assert_eq!(out.status.code(), Some(1));
    }
    let cfg = dir.path().join("empty.toml");
    std::fs::write(&cfg, "[sweep]\nnoise = []\n").unwrap();
    assert_eq!(diqkd(&["sweep", "--config", path_str(&cfg), "--out", path_str(&p)]).status.code(), Some(1));
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RateRow {
    eta: f64,
    kappa_bound: f64,
    final_len_per_m: f64,
    recon_cost: String,
    o_term_constant: f64,
    basis: String,
    eps: f64,
    m: usize,
}

#[test]
fn rates_csv_matches_library() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("rates.csv");
    let out = diqkd(&["rates", "--o-term", "0", "--basis", "check_rounds", "--recon-cost", "eleven_tenths_eta", "--out", path_str(&p)]);
    assert_eq!(out.status.code(), Some(0));
    let rows: Vec<RateRow> = csv::Reader::from_path(&p).unwrap().deserialize().collect::<Result<_, _>>().unwrap();
    assert_eq!(rows.len(), 31);
    assert_eq!(rows[0].recon_cost, "eleven_tenths_eta");
    assert_eq!(rows[0].basis, "check_rounds");
    assert_eq!((rows[0].o_term_constant, rows[0].eps, rows[0].m), (0.0, 1e-6, 120_000));
    assert!((rows[0].kappa_bound - (2f64.sqrt() - 1.0) / (4.0 * 2f64.ln())).abs() < 1e-12);
    assert!((rows[0].final_len_per_m - rows[0].kappa_bound / 6.0).abs() < 1e-12);
    // Rate positive below the crossing near η = 0.0103, zero above it.
    assert!(rows[10].final_len_per_m > 0.0 && rows[11].final_len_per_m == 0.0);
    assert!(rows.windows(2).all(|w| w[1].eta > w[0].eta && w[1].final_len_per_m <= w[0].final_len_per_m));
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttackRow {
    device: String,
    sessions: u64,
    abort_rate: f64,
    abort_lo: f64,
    abort_hi: f64,
    bell_aborts: u64,
    check_aborts: u64,
    recon_aborts: u64,
    mean_key_len: f64,
    key_mismatches: u64,
    per_bit_guess_rate: f64,
    decoded_accuracy: Option<f64>,
    mean_flipped_bell_rounds: Option<f64>,
}

#[test]
fn attack_battery_emits_four_rows() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("attack.csv");
    let out = diqkd(&["attack", "--m", "20000", "--bell-size", "4000", "--trials", "8", "--seed", "2", "--out", path_str(&p)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<AttackRow> = csv::Reader::from_path(&p).unwrap().deserialize().collect::<Result<_, _>>().unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.device.as_str()).collect();
    assert_eq!(names, ["deterministic", "memory", "covert(0.05)", "covert(0.002)"]);
    for r in &rows[..3] {
        assert_eq!(r.sessions, 8);
        assert_eq!(r.abort_rate, 1.0, "{r:?}");
        assert_eq!(r.bell_aborts, 8);
        assert!(r.abort_lo <= r.abort_rate && r.abort_rate <= r.abort_hi);
    }
    assert!(rows[0].decoded_accuracy.is_none() && rows[2].decoded_accuracy.is_some());
    assert!(rows[3].mean_flipped_bell_rounds.unwrap() < rows[2].mean_flipped_bell_rounds.unwrap());
    assert!(rows.iter().all(|r| r.key_mismatches == 0 && r.check_aborts + r.recon_aborts == 0));
    assert!(rows[..3].iter().all(|r| r.mean_key_len == 0.0 && r.per_bit_guess_rate == 0.0));
    assert!(rows[3].mean_key_len > 0.0 && (0.0..=1.0).contains(&rows[3].per_bit_guess_rate));
}

#[test]
fn toeplitz_of_zero_file_is_zero() {
    let dir = TempDir::new().unwrap();
    let (input, out) = (dir.path().join("zero.bin"), dir.path().join("zero.out"));
    std::fs::write(&input, vec![0u8; 256]).unwrap();
    for seed in ["0", "99"] {
        let r = diqkd(&["extract", "--input", path_str(&input), "--out", path_str(&out), "--out-len", "100", "--seed", seed]);
        assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
        assert_eq!(std::fs::read(&out).unwrap(), vec![0u8; 13]);
    }
    assert_eq!(diqkd(&["extract", "--input", path_str(&input), "--out", path_str(&out), "--input-bits", "4096"]).status.code(), Some(1));
    assert_eq!(diqkd(&["extract", "--out", path_str(&out)]).status.code(), Some(1));
}

#[test]
fn trevisan_matches_fixture_and_codeword_oracle() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("t.out");
    let input = fixture("trevisan_input.bin");
    let r = diqkd(&["extract", "--pa", "trevisan", "--eps", "0.9", "--out-len", "8", "--seed", "9", "--input", path_str(&input), "--out", path_str(&out)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let produced = std::fs::read(&out).unwrap();
    let expected = std::fs::read_to_string(fixture("trevisan_output.hex")).unwrap();
    assert_eq!(diqkd::bits::to_hex(&unpack_le(&produced, 8)), expected.trim());

    // Oracle: index the fully materialised codeword with each seed restriction.
    let x = unpack_le(&std::fs::read(&input).unwrap(), 64);
    let config = ExtractorConfig::for_source(64, 8, 0.9).unwrap();
    let mut rng = stream(9, 0);
    let seed: Vec<bool> = (0..config.seed_len()).map(|_| rng.random()).collect();
    let word = rs_hadamard_encode(&x, &config.code).unwrap();
    let bits: Vec<bool> = config
        .design
        .sets
        .iter()
        .map(|set| word[set.iter().enumerate().fold(0usize, |acc, (j, &e)| acc | (seed[e as usize] as usize) << j)])
        .collect();
    assert_eq!(pack_le(&bits), produced);
}
