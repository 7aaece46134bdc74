//! Run configuration: an optional TOML file merged with command-line flags.
//!
//! Flags always win over file values, and file values win over built-in
//! defaults. Every key is documented in the README; unknown keys are errors.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use serde::Deserialize;

use diqkd::analysis::{KeyBasis, RateModel, ReconCost};
use diqkd::devices::DeviceKind;
use diqkd::eve::EveKind;
use diqkd::protocol::{PaBackend, ProtocolParams};
use diqkd::recon::ReconConfig;

pub const DEFAULT_SECRET: &str = "10110010";
pub const DEFAULT_TAPE: &str = "diqkd shared tape";
pub const DEFAULT_NOISE_GRID: [f64; 4] = [0.0, 0.005, 0.01, 0.02];

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub protocol: ProtocolSection,
    pub rate_model: RateSection,
    pub device: DeviceSection,
    pub eve: EveSection,
    pub sweep: SweepSection,
    pub rates: RatesSection,
    pub extract: ExtractSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub m: Option<usize>,
    pub eps: Option<f64>,
    pub eta: Option<f64>,
    pub c_gamma: Option<f64>,
    /// Overrides c_gamma so that round(γm) equals this.
    pub bell_size: Option<usize>,
    pub kappa: Option<f64>,
    pub pa: Option<PaBackend>,
    pub enforce_bell_test: Option<bool>,
    pub recon_q_factor: Option<f64>,
    pub recon_passes: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSection {
    pub recon_cost: Option<String>,
    pub leak_per_bit: Option<f64>,
    pub o_term_constant: Option<f64>,
    pub basis: Option<String>,
    pub bell_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceSection {
    pub name: Option<String>,
    pub noise: Option<f64>,
    pub flip_rate: Option<f64>,
    pub secret: Option<String>,
    pub tape: Option<String>,
    pub alice: Option<String>,
    pub bob: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EveSection {
    pub name: Option<String>,
    pub training_sessions: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub noise: Option<Vec<f64>>,
    pub eta: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesSection {
    pub eta: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractSection {
    pub input: Option<PathBuf>,
    pub input_bits: Option<usize>,
    pub out_len: Option<usize>,
}

/// Flags shared by every subcommand.
#[derive(Debug, Default, Args)]
pub struct Flags {
    /// TOML configuration file; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long = "c-gamma")]
    pub c_gamma: Option<f64>,
    /// Sets C_γ so that the Bell set has exactly this many rounds
    #[arg(long = "bell-size")]
    pub bell_size: Option<usize>,
    /// Depolarizing noise of the honest device
    #[arg(long)]
    pub noise: Option<f64>,
    /// honest | deterministic | memory | covert
    #[arg(long)]
    pub device: Option<String>,
    /// Flip rate of the covert device
    #[arg(long = "flip-rate")]
    pub flip_rate: Option<f64>,
    /// none | transcript | covert
    #[arg(long)]
    pub eve: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// toeplitz | trevisan
    #[arg(long)]
    pub pa: Option<String>,
    /// twice_eta | eleven_tenths_eta | empirical
    #[arg(long = "recon-cost")]
    pub recon_cost: Option<String>,
    #[arg(long = "o-term")]
    pub o_term: Option<f64>,
    /// check_rounds | check_minus_bell
    #[arg(long)]
    pub basis: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated noise grid for `sweep`
    #[arg(long = "noise-grid")]
    pub noise_grid: Option<String>,
    /// Comma-separated η grid for `sweep` and `rates`
    #[arg(long = "eta-grid")]
    pub eta_grid: Option<String>,
    /// Input bit file for `extract`
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Number of input bits to read (default: 8 × file size)
    #[arg(long = "input-bits")]
    pub input_bits: Option<usize>,
    /// Extractor output length
    #[arg(long = "out-len")]
    pub out_len: Option<usize>,
}

/// Fully resolved and validated settings.
#[derive(Debug)]
pub struct RunConfig {
    pub params: ProtocolParams,
    pub device: DeviceKind,
    pub eve: EveKind,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub noise_grid: Vec<f64>,
    pub eta_grid: Vec<f64>,
    pub rate_eta_grid: Vec<f64>,
    pub input: Option<PathBuf>,
    pub input_bits: Option<usize>,
    pub out_len: usize,
    /// Covert device settings, reused by the attack battery.
    pub secret: Vec<bool>,
    pub tape: Vec<u8>,
    pub training_sessions: usize,
}

fn parse_bits(s: &str, what: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => bail!("{what} must be a string of 0/1, got {s:?}"),
        })
        .collect()
}

pub fn parse_grid(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("{what}: {t:?} is not a number")))
        .collect()
}

fn parse_pa(s: &str) -> Result<PaBackend> {
    match s {
        "toeplitz" => Ok(PaBackend::Toeplitz),
        "trevisan" => Ok(PaBackend::Trevisan),
        _ => bail!("unknown PA backend {s:?} (toeplitz | trevisan)"),
    }
}

fn default_rate_grid() -> Vec<f64> {
    (0..=30).map(|i| i as f64 * 0.001).collect()
}

impl RunConfig {
    pub fn load(flags: &Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => read_file(path)?,
            None => FileConfig::default(),
        };
        Self::merge(flags, file)
    }

    fn merge(f: &Flags, file: FileConfig) -> Result<Self> {
        let defaults = ProtocolParams::default();
        let p = &file.protocol;
        let pa = match f.pa.as_deref() {
            Some(s) => parse_pa(s)?,
            None => p.pa.unwrap_or(defaults.pa),
        };

        let r = &file.rate_model;
        let base = RateModel::default();
        let recon_cost = match f.recon_cost.as_deref().or(r.recon_cost.as_deref()) {
            None => base.recon_cost,
            Some("twice_eta") => ReconCost::TwiceEta,
            Some("eleven_tenths_eta") => ReconCost::ElevenTenthsEta,
            Some("empirical") => ReconCost::Empirical { leak_per_bit: r.leak_per_bit.unwrap_or(0.0) },
            Some(other) => bail!("unknown recon cost {other:?} (twice_eta | eleven_tenths_eta | empirical)"),
        };
        let basis = match f.basis.as_deref().or(r.basis.as_deref()) {
            None => base.basis,
            Some("check_rounds") => KeyBasis::CheckRounds,
            Some("check_minus_bell") => KeyBasis::CheckMinusBell { bell_fraction: r.bell_fraction.unwrap_or(0.0) },
            Some(other) => bail!("unknown key basis {other:?} (check_rounds | check_minus_bell)"),
        };
        let rate_model = RateModel { recon_cost, o_term_constant: f.o_term.or(r.o_term_constant).unwrap_or(base.o_term_constant), basis };

        let mut params = ProtocolParams {
            m: f.m.or(p.m).unwrap_or(defaults.m),
            eps: f.eps.or(p.eps).unwrap_or(defaults.eps),
            eta: f.eta.or(p.eta).unwrap_or(defaults.eta),
            c_gamma: f.c_gamma.or(p.c_gamma).unwrap_or(defaults.c_gamma),
            kappa: p.kappa,
            rate_model,
            recon: ReconConfig { passes: p.recon_passes.unwrap_or(defaults.recon.passes), ..defaults.recon },
            recon_q_factor: p.recon_q_factor.unwrap_or(defaults.recon_q_factor),
            pa,
            enforce_bell_test: p.enforce_bell_test.unwrap_or(defaults.enforce_bell_test),
        };
        if let Some(size) = f.bell_size.or(p.bell_size) {
            params = params.with_bell_size(size);
        }
        params.validate().context("invalid protocol parameters")?;
        rate_model.validate().context("invalid rate model")?;

        let d = &file.device;
        let secret = parse_bits(d.secret.as_deref().unwrap_or(DEFAULT_SECRET), "device.secret")?;
        let tape = d.tape.as_deref().unwrap_or(DEFAULT_TAPE).as_bytes().to_vec();
        let flip_rate = f.flip_rate.or(d.flip_rate).unwrap_or(0.05);
        let device = match f.device.as_deref().or(d.name.as_deref()).unwrap_or("honest") {
            "honest" => DeviceKind::Honest { noise: f.noise.or(d.noise).unwrap_or(0.0) },
            "deterministic" => {
                let alice = parse_bits(d.alice.as_deref().unwrap_or("000"), "device.alice")?;
                let bob = parse_bits(d.bob.as_deref().unwrap_or("00"), "device.bob")?;
                DeviceKind::Deterministic {
                    alice: alice.try_into().map_err(|_| anyhow::anyhow!("device.alice needs 3 bits"))?,
                    bob: bob.try_into().map_err(|_| anyhow::anyhow!("device.bob needs 2 bits"))?,
                }
            }
            "memory" => DeviceKind::Memory { tape: tape.clone() },
            "covert" => DeviceKind::Covert { secret: secret.clone(), flip_rate, tape: tape.clone() },
            other => bail!("unknown device {other:?} (honest | deterministic | memory | covert)"),
        };
        device.validate().context("invalid device")?;

        let training_sessions = file.eve.training_sessions.unwrap_or(0);
        let eve = match f.eve.as_deref().or(file.eve.name.as_deref()).unwrap_or("none") {
            "none" => EveKind::None,
            "transcript" => EveKind::Transcript { training_sessions },
            "covert" => match &device {
                DeviceKind::Covert { secret, flip_rate, tape } => {
                    EveKind::CovertDecoder { tape: tape.clone(), flip_rate: *flip_rate, secret_len: secret.len() }
                }
                _ => bail!("eve \"covert\" needs the covert device"),
            },
            other => bail!("unknown eve {other:?} (none | transcript | covert)"),
        };

        let trials = f.trials.or(file.trials).unwrap_or(10);
        ensure!(trials >= 1, "trials must be ≥ 1");

        let noise_grid = match &f.noise_grid {
            Some(s) => parse_grid(s, "noise grid")?,
            None => file.sweep.noise.unwrap_or_else(|| DEFAULT_NOISE_GRID.to_vec()),
        };
        let eta_grid = match &f.eta_grid {
            Some(s) => parse_grid(s, "eta grid")?,
            None => file.sweep.eta.unwrap_or_else(|| vec![params.eta]),
        };
        let rate_eta_grid = match &f.eta_grid {
            Some(s) => parse_grid(s, "eta grid")?,
            None => file.rates.eta.unwrap_or_else(default_rate_grid),
        };

        Ok(Self {
            params,
            device,
            eve,
            trials,
            seed: f.seed.or(file.seed).unwrap_or(0),
            out: f.out.clone().or(file.out),
            noise_grid,
            eta_grid,
            rate_eta_grid,
            input: f.input.clone().or(file.extract.input),
            input_bits: f.input_bits.or(file.extract.input_bits),
            out_len: f.out_len.or(file.extract.out_len).unwrap_or(64),
            secret,
            tape,
            training_sessions,
        })
    }

    pub fn out_path(&self, command: &str) -> Result<&Path> {
        self.out.as_deref().with_context(|| format!("{command} needs --out"))
    }
}

fn read_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
