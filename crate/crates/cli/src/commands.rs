use std::path::Path;

use anyhow::{ensure, Context, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

use diqkd::analysis::{key_rate, KeyBasis, ReconCost};
use diqkd::bits::{pack_le, to_hex, unpack_le};
use diqkd::devices::DeviceKind;
use diqkd::eve::{evaluate_security, EveKind};
use diqkd::extract::{toeplitz_hash, trevisan_extract, ExtractorConfig, ToeplitzSeed};
use diqkd::protocol::{run_protocol_a, PaBackend, ProtocolParams};
use diqkd::rng::stream;

use crate::config::RunConfig;

/// What a command reports back to `main`.
pub struct Report {
    pub summary: String,
    pub aborted: bool,
}

fn done(summary: String) -> Result<Report> {
    Ok(Report { summary, aborted: false })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// One session; it uses stream 0 of the seed, so it matches session 0 of a batch.
pub fn simulate(c: &RunConfig) -> Result<Report> {
    let mut rng = stream(c.seed, 0);
    let mut pair = c.device.build(&mut rng)?;
    let result = run_protocol_a(&mut pair, None, &c.params, &mut rng)?;
    if let Some(path) = &c.out {
        std::fs::write(path, result.to_json()?).with_context(|| format!("writing {}", path.display()))?;
    }
    let summary = match result.abort {
        Some(reason) => format!(
            "abort={} device={} m={} bell={} eta_observed={:.5}",
            reason.as_str(),
            c.device.label(),
            result.m,
            result.bell_set.len(),
            result.eta_observed
        ),
        None => format!(
            "ok device={} m={} bell={} check={} eta_observed={:.5} leakage={} key_len={} keys_match={}",
            c.device.label(),
            result.m,
            result.bell_set.len(),
            result.check_set.len(),
            result.eta_observed,
            result.leakage_bits,
            result.alice_key.len(),
            result.alice_key == result.bob_key
        ),
    };
    Ok(Report { summary, aborted: result.aborted() })
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub noise: f64,
    pub eta: f64,
    pub abort_rate: f64,
    pub mean_key_len: f64,
    pub per_bit_guess_rate: f64,
}

/// Every grid point reuses the same master seed, so points differ only in their parameters.
pub fn sweep(c: &RunConfig) -> Result<Report> {
    let path = c.out_path("sweep")?;
    ensure!(!c.noise_grid.is_empty() && !c.eta_grid.is_empty(), "sweep grid is empty");
    let eve = match c.eve {
        EveKind::None => EveKind::Transcript { training_sessions: c.training_sessions },
        ref e => e.clone(),
    };
    let mut rows = Vec::new();
    for &eta in &c.eta_grid {
        let params = ProtocolParams { eta, ..c.params.clone() };
        params.validate().with_context(|| format!("grid point η = {eta}"))?;
        for &noise in &c.noise_grid {
            let r = evaluate_security(&DeviceKind::Honest { noise }, &eve, &params, c.trials, c.seed)?;
            rows.push(SweepRow {
                noise,
                eta,
                abort_rate: r.abort_rate.value,
                mean_key_len: r.mean_key_len,
                per_bit_guess_rate: r.per_bit_guess_rate.value,
            });
        }
    }
    write_csv(path, &rows)?;
    done(format!("sweep: {} points × {} trials written to {}", rows.len(), c.trials, path.display()))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct RateRow {
    pub eta: f64,
    pub kappa_bound: f64,
    pub final_len_per_m: f64,
    pub recon_cost: String,
    pub o_term_constant: f64,
    pub basis: String,
    pub eps: f64,
    pub m: usize,
}

pub fn rates(c: &RunConfig) -> Result<Report> {
    let path = c.out_path("rates")?;
    ensure!(!c.rate_eta_grid.is_empty(), "η grid is empty");
    let model = c.params.rate_model;
    let recon_cost = match model.recon_cost {
        ReconCost::TwiceEta => "twice_eta".to_string(),
        ReconCost::ElevenTenthsEta => "eleven_tenths_eta".to_string(),
        ReconCost::Empirical { leak_per_bit } => format!("empirical:{leak_per_bit}"),
    };
    let basis = match model.basis {
        KeyBasis::CheckRounds => "check_rounds".to_string(),
        KeyBasis::CheckMinusBell { bell_fraction } => format!("check_minus_bell:{bell_fraction}"),
    };
    let rows = c
        .rate_eta_grid
        .iter()
        .map(|&eta| {
            let r = key_rate(eta, c.params.eps, c.params.m, &model)?;
            Ok(RateRow {
                eta,
                kappa_bound: r.kappa_bound,
                final_len_per_m: r.final_len_per_m,
                recon_cost: recon_cost.clone(),
                o_term_constant: model.o_term_constant,
                basis: basis.clone(),
                eps: c.params.eps,
                m: c.params.m,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let positive = rows.iter().filter(|r| r.final_len_per_m > 0.0).count();
    write_csv(path, &rows)?;
    done(format!("rates: {} η values ({positive} with positive rate) written to {}", rows.len(), path.display()))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct AttackRow {
    pub device: String,
    pub sessions: u64,
    pub abort_rate: f64,
    pub abort_lo: f64,
    pub abort_hi: f64,
    pub bell_aborts: u64,
    pub check_aborts: u64,
    pub recon_aborts: u64,
    pub mean_key_len: f64,
    pub key_mismatches: u64,
    pub per_bit_guess_rate: f64,
    pub decoded_accuracy: Option<f64>,
    pub mean_flipped_bell_rounds: Option<f64>,
}

/// Deterministic, shared-tape memory and two covert-channel devices.
pub fn attack(c: &RunConfig) -> Result<Report> {
    let path = c.out_path("attack")?;
    let transcript = EveKind::Transcript { training_sessions: c.training_sessions };
    let covert = |flip_rate: f64| {
        (
            DeviceKind::Covert { secret: c.secret.clone(), flip_rate, tape: c.tape.clone() },
            EveKind::CovertDecoder { tape: c.tape.clone(), flip_rate, secret_len: c.secret.len() },
        )
    };
    let battery = [
        (DeviceKind::best_deterministic(), transcript.clone()),
        (DeviceKind::Memory { tape: c.tape.clone() }, transcript),
        covert(0.05),
        covert(0.002),
    ];
    let mut rows = Vec::new();
    for (device, eve) in &battery {
        let r = evaluate_security(device, eve, &c.params, c.trials, c.seed)?;
        rows.push(AttackRow {
            device: device.label(),
            sessions: r.sessions,
            abort_rate: r.abort_rate.value,
            abort_lo: r.abort_rate.lo,
            abort_hi: r.abort_rate.hi,
            bell_aborts: r.bell_aborts,
            check_aborts: r.check_aborts,
            recon_aborts: r.recon_aborts,
            mean_key_len: r.mean_key_len,
            key_mismatches: r.key_mismatches,
            per_bit_guess_rate: r.per_bit_guess_rate.value,
            decoded_accuracy: r.decoded_accuracy_all.map(|e| e.value),
            mean_flipped_bell_rounds: r.mean_flipped_bell_rounds,
        });
    }
    write_csv(path, &rows)?;
    let aborts: Vec<String> = rows.iter().map(|r| format!("{}={:.3}", r.device, r.abort_rate)).collect();
    done(format!("attack: abort rates {} written to {}", aborts.join(" "), path.display()))
}

/// Reads packed bits (bit i in byte i/8, position i%8) and writes the hash output in the same packing.
pub fn extract(c: &RunConfig) -> Result<Report> {
    let out = c.out_path("extract")?;
    let input = c.input.as_deref().context("extract needs --input")?;
    let bytes = std::fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let n = c.input_bits.unwrap_or(bytes.len() * 8);
    ensure!(n >= 1, "input holds no bits");
    ensure!(n <= bytes.len() * 8, "--input-bits {n} exceeds the {} bits in the file", bytes.len() * 8);
    ensure!(c.out_len >= 1, "--out-len must be ≥ 1");
    let x = unpack_le(&bytes, n);
    let mut rng = stream(c.seed, 0);
    let bits = match c.params.pa {
        PaBackend::Toeplitz => toeplitz_hash(&x, &ToeplitzSeed::random(n, c.out_len, &mut rng), c.out_len)?,
        PaBackend::Trevisan => {
            let config = ExtractorConfig::for_source(n, c.out_len, c.params.eps)?;
            let seed: Vec<bool> = (0..config.seed_len()).map(|_| rng.random()).collect();
            trevisan_extract(&x, &seed, &config)?
        }
    };
    std::fs::write(out, pack_le(&bits)).with_context(|| format!("writing {}", out.display()))?;
    let backend = match c.params.pa {
        PaBackend::Toeplitz => "toeplitz",
        PaBackend::Trevisan => "trevisan",
    };
    done(format!("extract: {} bits via {backend} from {n} input bits, output {}", bits.len(), to_hex(&bits)))
}
