//! Run configuration: CLI flags, optional config file, and the run
//! manifest. The config file mirrors the flags by name; flags override
//! file values. A score manifest is itself a valid config file, so a run
//! can be reproduced with `--config manifest.json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use blanc_core::{BlancParams, EligibilityMode, GuardMode, DEFAULT_MAX_INPUT_LEN};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FileConfig {
    #[serde(rename = "in", default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(rename = "out", default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub masking_period: Option<usize>,
    #[serde(rename = "Lmin", default, skip_serializing_if = "Option::is_none")]
    pub min_word_len: Option<usize>,
    #[serde(rename = "pmask", default, skip_serializing_if = "Option::is_none")]
    pub p_mask: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passes: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_input_len: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| format!("cannot parse config {}: {e}", path.display()))
    }
}

/// Fully resolved configuration for one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(rename = "in")]
    pub input: PathBuf,
    #[serde(rename = "out")]
    pub output: PathBuf,
    pub backend: String,
    pub variant: String,
    pub guard: String,
    pub mode: String,
    #[serde(rename = "M")]
    pub masking_period: usize,
    #[serde(rename = "Lmin")]
    pub min_word_len: usize,
    #[serde(rename = "pmask")]
    pub p_mask: f64,
    pub passes: u32,
    pub seed: u64,
    pub jobs: usize,
    pub max_input_len: usize,
}

impl RunConfig {
    /// Merge explicit flag values over file values over defaults.
    #[allow(clippy::too_many_arguments)]
    pub fn resolve(
        file: FileConfig,
        input: Option<PathBuf>,
        output: Option<PathBuf>,
        backend: Option<String>,
        variant: Option<String>,
        guard: Option<String>,
        mode: Option<String>,
        masking_period: Option<usize>,
        min_word_len: Option<usize>,
        p_mask: Option<f64>,
        passes: Option<u32>,
        seed: Option<u64>,
        jobs: Option<usize>,
        max_input_len: Option<usize>,
    ) -> Result<Self, String> {
        let input = input
            .or(file.input)
            .ok_or("missing input corpus (--in or config)")?;
        let output = output
            .or(file.output)
            .ok_or("missing output directory (--out or config)")?;
        Ok(Self {
            input,
            output,
            backend: backend.or(file.backend).unwrap_or_else(|| "reference".into()),
            variant: variant.or(file.variant).unwrap_or_else(|| "help".into()),
            guard: guard.or(file.guard).unwrap_or_else(|| "off".into()),
            mode: mode.or(file.mode).unwrap_or_else(|| "word".into()),
            masking_period: masking_period.or(file.masking_period).unwrap_or(6),
            min_word_len: min_word_len.or(file.min_word_len).unwrap_or(4),
            p_mask: p_mask.or(file.p_mask).unwrap_or(0.15),
            passes: passes.or(file.passes).unwrap_or(10),
            seed: seed.or(file.seed).unwrap_or(0),
            jobs: jobs.or(file.jobs).unwrap_or(1),
            max_input_len: max_input_len.or(file.max_input_len).unwrap_or(DEFAULT_MAX_INPUT_LEN),
        })
    }

    pub fn params(&self) -> Result<BlancParams, String> {
        let mode = match self.mode.as_str() {
            "word" => EligibilityMode::Word,
            "token" => EligibilityMode::Token,
            other => return Err(format!("unknown mode '{other}' (word|token)")),
        };
        let guard = match self.guard.as_str() {
            "off" => GuardMode::Off,
            "skip_sentence" => GuardMode::SkipSentence,
            "drop_copy" => GuardMode::DropCopy,
            other => return Err(format!("unknown guard '{other}' (off|skip_sentence|drop_copy)")),
        };
        let params = BlancParams {
            masking_period: self.masking_period,
            min_word_len: self.min_word_len,
            mode,
            p_mask: self.p_mask,
            tune_passes: self.passes,
            guard,
            seed: self.seed,
        };
        params.validate().map_err(|e| e.to_string())?;
        Ok(params)
    }
}

/// Written next to every output; contains everything needed for a
/// bit-exact rerun.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub code_version: String,
    #[serde(flatten)]
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n")
    }
}
