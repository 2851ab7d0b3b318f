//! Checkpoint directory layout and atomic persistence.
//!
//! A checkpoint directory holds, depending on how far training has come:
//!   ndsm.bundle, generator.bundle, discriminator.bundle — network snapshots
//!   optimizer.state — Adam moments of the phase's primary network
//!   discriminator_optimizer.state — the adversarial phase's second Adam
//!   history.log — one JSON record per optimizer step
//!   manifest.txt — phase, step counter, config hash, selected epsilon
//!
//! Every file is written to a temporary sibling and renamed into place, so
//! a crash mid-write never leaves a torn file behind.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::models::{load_bundle, load_optimizer_state, ModelBundle, ModelKind, OptimizerState};

use super::{HistoryRecord, Phase};

/// Progress marker persisted in `manifest.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointState {
    pub phase: Phase,
    /// Optimizer steps completed within `phase`.
    pub step: u64,
    /// `TrainConfig::stable_hash` of the run that wrote the checkpoint.
    pub config_hash: u64,
    pub scale: usize,
    /// Huber threshold once selected (at the start of the adversarial phase).
    pub epsilon: Option<f64>,
    /// Generator pretraining validation MAE once measured.
    pub pretrain_mae: Option<f64>,
}

/// Handle to one checkpoint directory.
#[derive(Debug, Clone)]
pub struct CheckpointDir {
    dir: PathBuf,
}

impl CheckpointDir {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn generator_path(&self) -> PathBuf {
        self.dir.join("generator.bundle")
    }

    pub fn discriminator_path(&self) -> PathBuf {
        self.dir.join("discriminator.bundle")
    }

    pub fn ndsm_path(&self) -> PathBuf {
        self.dir.join("ndsm.bundle")
    }

    pub fn optimizer_path(&self) -> PathBuf {
        self.dir.join("optimizer.state")
    }

    pub fn discriminator_optimizer_path(&self) -> PathBuf {
        self.dir.join("discriminator_optimizer.state")
    }

    pub fn history_path(&self) -> PathBuf {
        self.dir.join("history.log")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join("manifest.txt")
    }

    fn ensure_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))
    }

    /// Read the progress marker; `None` when the directory holds no
    /// checkpoint yet.
    pub fn read_state(&self) -> Result<Option<CheckpointState>> {
        let path = self.manifest_path();
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let mut phase = None;
        let mut step = None;
        let mut config_hash = None;
        let mut scale = None;
        let mut epsilon = None;
        let mut pretrain_mae = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::checkpoint(format!("{}: malformed manifest line {line:?}", path.display()))
            })?;
            let bad = |what: &str| {
                Error::checkpoint(format!("{}: cannot parse {what} from {v:?}", path.display()))
            };
            match k {
                "phase" => phase = Some(Phase::parse(v).map_err(|_| bad("phase"))?),
                "step" => step = Some(v.parse().map_err(|_| bad("step"))?),
                "config_hash" => config_hash = Some(v.parse().map_err(|_| bad("config_hash"))?),
                "scale" => scale = Some(v.parse().map_err(|_| bad("scale"))?),
                "epsilon" => epsilon = Some(v.parse().map_err(|_| bad("epsilon"))?),
                "pretrain_mae" => pretrain_mae = Some(v.parse().map_err(|_| bad("pretrain_mae"))?),
                other => {
                    return Err(Error::checkpoint(format!(
                        "{}: unknown manifest key {other:?}",
                        path.display()
                    )))
                }
            }
        }
        match (phase, step, config_hash, scale) {
            (Some(phase), Some(step), Some(config_hash), Some(scale)) => Ok(Some(CheckpointState {
                phase,
                step,
                config_hash,
                scale,
                epsilon,
                pretrain_mae,
            })),
            _ => Err(Error::checkpoint(format!(
                "{}: manifest is missing phase/step/config_hash/scale",
                path.display()
            ))),
        }
    }

    pub fn write_state(&self, state: &CheckpointState) -> Result<()> {
        self.ensure_dir()?;
        let mut text = format!(
            "phase={}\nstep={}\nconfig_hash={}\nscale={}\n",
            state.phase.as_str(),
            state.step,
            state.config_hash,
            state.scale
        );
        if let Some(eps) = state.epsilon {
            text.push_str(&format!("epsilon={eps}\n"));
        }
        if let Some(mae) = state.pretrain_mae {
            text.push_str(&format!("pretrain_mae={mae}\n"));
        }
        atomic_write(&self.manifest_path(), text.as_bytes())
    }

    pub fn save_bundle(&self, path: &Path, bundle: &ModelBundle) -> Result<()> {
        self.ensure_dir()?;
        let tmp = tmp_sibling(path);
        crate::models::save_bundle(bundle, &tmp)?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load_bundle_kind(&self, path: &Path, kind: ModelKind) -> Result<ModelBundle> {
        if !path.exists() {
            return Err(Error::checkpoint(format!(
                "{}: {} bundle missing",
                path.display(),
                kind.as_str()
            )));
        }
        let bundle = load_bundle(path)?;
        bundle.expect_kind(kind)?;
        Ok(bundle)
    }

    pub fn save_optimizer(&self, path: &Path, state: &OptimizerState) -> Result<()> {
        self.ensure_dir()?;
        let tmp = tmp_sibling(path);
        crate::models::save_optimizer_state(state, &tmp)?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load_optimizer(&self, path: &Path) -> Result<OptimizerState> {
        if !path.exists() {
            return Err(Error::checkpoint(format!(
                "{}: optimizer state missing",
                path.display()
            )));
        }
        load_optimizer_state(path)
    }

    /// Append records to the step log.
    pub fn append_history(&self, records: &[HistoryRecord]) -> Result<()> {
        self.ensure_dir()?;
        let path = self.history_path();
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let mut buf = String::new();
        for r in records {
            let line = serde_json::to_string(r)
                .map_err(|e| Error::data(format!("history encode: {e}")))?;
            buf.push_str(&line);
            buf.push('\n');
        }
        file.write_all(buf.as_bytes()).map_err(|e| Error::io(&path, e))
    }

    pub fn read_history(&self) -> Result<Vec<HistoryRecord>> {
        let path = self.history_path();
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let mut out = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: HistoryRecord = serde_json::from_str(line)
                .map_err(|e| Error::checkpoint(format!("{}: bad history record: {e}", path.display())))?;
            out.push(rec);
        }
        Ok(out)
    }

    /// Drop log records past a phase's checkpointed step. A crash between
    /// log append and checkpoint write can leave extra records; resuming
    /// trims them so the log always matches executed-and-persisted steps.
    pub fn truncate_history(&self, phase: Phase, step: u64) -> Result<()> {
        let all = self.read_history()?;
        let kept: Vec<&HistoryRecord> = all
            .iter()
            .filter(|r| {
                r.phase.order() < phase.order()
                    || (r.phase == phase && r.step <= step)
            })
            .collect();
        if kept.len() == all.len() {
            return Ok(());
        }
        let mut buf = String::new();
        for r in kept {
            buf.push_str(&serde_json::to_string(r).map_err(|e| Error::data(e.to_string()))?);
            buf.push('\n');
        }
        atomic_write(&self.history_path(), buf.as_bytes())
    }

    /// Records belonging to one phase, in step order.
    pub fn phase_history(&self, phase: Phase) -> Result<Vec<HistoryRecord>> {
        Ok(self
            .read_history()?
            .into_iter()
            .filter(|r| r.phase == phase)
            .collect())
    }
}

fn tmp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Write via a temporary sibling plus rename, so readers never observe a
/// partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_sibling(path);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state() -> CheckpointState {
        CheckpointState {
            phase: Phase::SrPretrain,
            step: 42,
            config_hash: 0xDEADBEEF,
            scale: 4,
            epsilon: Some(0.0625),
            pretrain_mae: Some(0.03125),
        }
    }

    #[test]
    fn manifest_round_trips_including_floats() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = CheckpointDir::new(dir.path());
        assert_eq!(ckpt.read_state().unwrap(), None);
        let s = state();
        ckpt.write_state(&s).unwrap();
        assert_eq!(ckpt.read_state().unwrap(), Some(s));
    }

    #[test]
    fn awkward_floats_survive_the_text_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = CheckpointDir::new(dir.path());
        let mut s = state();
        s.epsilon = Some(2.0 * 0.016666666666666666);
        s.pretrain_mae = Some(0.016666666666666666);
        ckpt.write_state(&s).unwrap();
        let back = ckpt.read_state().unwrap().unwrap();
        assert_eq!(back.epsilon.unwrap().to_bits(), s.epsilon.unwrap().to_bits());
        assert_eq!(
            back.pretrain_mae.unwrap().to_bits(),
            s.pretrain_mae.unwrap().to_bits()
        );
    }

    #[test]
    fn corrupt_manifest_is_a_checkpoint_error() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = CheckpointDir::new(dir.path());
        std::fs::write(ckpt.manifest_path(), "phase=ndsm\nstep=oops\n").unwrap();
        let err = ckpt.read_state().unwrap_err();
        assert_eq!(err.exit_code(), 4);
        std::fs::write(ckpt.manifest_path(), "phase=ndsm\nstep=3\n").unwrap();
        assert!(ckpt.read_state().is_err(), "missing keys should be rejected");
    }

    #[test]
    fn history_appends_reads_and_truncates() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = CheckpointDir::new(dir.path());
        assert!(ckpt.read_history().unwrap().is_empty());
        let rec = |phase, step| HistoryRecord {
            phase,
            step,
            content: 0.5,
            ndsm: 0.0,
            adversarial: 0.0,
            total: 0.5,
        };
        ckpt.append_history(&[rec(Phase::Ndsm, 1), rec(Phase::Ndsm, 2)]).unwrap();
        ckpt.append_history(&[rec(Phase::SrPretrain, 1), rec(Phase::SrPretrain, 2)])
            .unwrap();
        assert_eq!(ckpt.read_history().unwrap().len(), 4);
        // Trimming at sr-pretrain step 1 keeps all earlier-phase records.
        ckpt.truncate_history(Phase::SrPretrain, 1).unwrap();
        let left = ckpt.read_history().unwrap();
        assert_eq!(left.len(), 3);
        assert_eq!(left[2].phase, Phase::SrPretrain);
        assert_eq!(left[2].step, 1);
        assert_eq!(ckpt.phase_history(Phase::Ndsm).unwrap().len(), 2);
    }

    #[test]
    fn missing_bundle_names_what_is_missing() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = CheckpointDir::new(dir.path());
        let err = ckpt
            .load_bundle_kind(&ckpt.generator_path(), ModelKind::Generator)
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("generator"), "{msg}");
        assert!(msg.contains("missing"), "{msg}");
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn atomic_write_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("out.txt");
        atomic_write(&target, b"hello").unwrap();
        assert_eq!(std::fs::read(&target).unwrap(), b"hello");
        let names: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names.len(), 1);
    }
}
