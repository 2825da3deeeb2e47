//! `key = value` run configuration with `#` comments.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ilstm_core::models::ModelKind;
use ilstm_core::textpipe::GLOVE_DIM;
use ilstm_core::trainer::{OptimizerKind, TrainConfig};
use ilstm_core::{Error, Result};

pub const KEYS: &[&str] = &[
    "glove_path",
    "train_path",
    "test_path",
    "qa_path",
    "embedding_dim",
    "model",
    "hidden",
    "optimizer",
    "learning_rate",
    "beta1",
    "beta2",
    "epsilon",
    "batch_size",
    "epochs",
    "seed",
    "clip",
    "validation_fraction",
    "hs",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub glove_path: Option<PathBuf>,
    pub train_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    /// Tab-separated question/answer pairs for the responder.
    pub qa_path: Option<PathBuf>,
    pub embedding_dim: usize,
    pub model: ModelKind,
    pub train: TrainConfig,
    /// Hidden sizes for `sweep`.
    pub hs: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            glove_path: None,
            train_path: None,
            test_path: None,
            qa_path: None,
            embedding_dim: GLOVE_DIM,
            model: ModelKind::Two,
            train: TrainConfig::default(),
            hs: vec![25, 50, 75, 100],
        }
    }
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

fn num<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| bad(line, format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    /// Reads and validates a file; relative paths resolve against its
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let cfg = Self::parse(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without touching the file system.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let (mut optimizer, mut lr, mut beta1, mut beta2, mut eps) = ("adam".to_string(), None, 0.9, 0.999, 1e-8);
        let mut seen = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| bad(line, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(bad(line, format!("unknown key {key:?}")));
            }
            if seen.contains(&key) {
                return Err(bad(line, format!("duplicate key {key:?}")));
            }
            seen.push(key);
            let path = || Some(base.join(value));
            match key {
                "glove_path" => cfg.glove_path = path(),
                "train_path" => cfg.train_path = path(),
                "test_path" => cfg.test_path = path(),
                "qa_path" => cfg.qa_path = path(),
                "embedding_dim" => cfg.embedding_dim = num(key, value, line)?,
                "model" => cfg.model = value.parse().map_err(|e| bad(line, e))?,
                "hidden" => cfg.train.hidden = num(key, value, line)?,
                "optimizer" => optimizer = value.to_ascii_lowercase(),
                "learning_rate" => lr = Some(num(key, value, line)?),
                "beta1" => beta1 = num(key, value, line)?,
                "beta2" => beta2 = num(key, value, line)?,
                "epsilon" => eps = num(key, value, line)?,
                "batch_size" => cfg.train.batch_size = num(key, value, line)?,
                "epochs" => cfg.train.epochs = num(key, value, line)?,
                "seed" => cfg.train.seed = num(key, value, line)?,
                "clip" => {
                    cfg.train.clip = match value {
                        "none" | "off" => None,
                        v => Some(num(key, v, line)?),
                    }
                }
                "validation_fraction" => cfg.train.validation_fraction = num(key, value, line)?,
                "hs" => {
                    cfg.hs = value
                        .split(',')
                        .map(|h| num("hs", h.trim(), line))
                        .collect::<Result<Vec<usize>>>()?
                }
                _ => unreachable!("key list and match arms agree"),
            }
        }
        cfg.train.optimizer = match optimizer.as_str() {
            "adam" => OptimizerKind::Adam {
                lr: lr.unwrap_or(1e-3),
                beta1,
                beta2,
                eps,
            },
            "sgd" => OptimizerKind::Sgd { lr: lr.unwrap_or(0.1) },
            other => return Err(Error::Config(format!("unknown optimizer {other:?}, expected adam or sgd"))),
        };
        Ok(cfg)
    }

    /// Checks value ranges and that every configured path exists.
    pub fn validate(&self) -> Result<()> {
        self.train.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.embedding_dim == 0 {
            return Err(Error::Config("embedding_dim must be positive".into()));
        }
        if self.hs.is_empty() || self.hs.contains(&0) {
            return Err(Error::Config(format!("hs must list positive hidden sizes, got {:?}", self.hs)));
        }
        for (key, path) in [
            ("glove_path", &self.glove_path),
            ("train_path", &self.train_path),
            ("test_path", &self.test_path),
            ("qa_path", &self.qa_path),
        ] {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(Error::Config(format!("{key}: {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    pub fn require<'a>(&self, key: &str, value: &'a Option<PathBuf>) -> Result<&'a Path> {
        value.as_deref().ok_or_else(|| Error::Config(format!("{key} is not set")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys() {
        let text = "\
# comment
glove_path = g.txt   # trailing comment
train_path = /abs/train.txt
embedding_dim = 16
model = one
hidden = 50
optimizer = adam
learning_rate = 0.01
beta1 = 0.8
batch_size = 16
epochs = 3
seed = 9
clip = 5
validation_fraction = 0.1
hs = 25, 50
";
        let c = RunConfig::parse(text, Path::new("/cfg")).unwrap();
        assert_eq!(c.glove_path.as_deref(), Some(Path::new("/cfg/g.txt")));
        assert_eq!(c.train_path.as_deref(), Some(Path::new("/abs/train.txt")));
        assert_eq!(c.model, ModelKind::One);
        assert_eq!(c.train.hidden, 50);
        assert_eq!(
            c.train.optimizer,
            OptimizerKind::Adam {
                lr: 0.01,
                beta1: 0.8,
                beta2: 0.999,
                eps: 1e-8
            }
        );
        assert_eq!((c.train.batch_size, c.train.epochs, c.train.seed), (16, 3, 9));
        assert_eq!(c.train.clip, Some(5.0));
        assert_eq!(c.hs, [25, 50]);
    }

    #[test]
    fn defaults() {
        let c = RunConfig::parse("", Path::new("")).unwrap();
        assert_eq!(c.train, TrainConfig::default());
        assert_eq!(c.embedding_dim, 300);
        assert_eq!(c.train.clip, None);
    }

    #[test]
    fn rejects_mistakes() {
        for text in ["hiden = 5", "hidden", "hidden = x", "optimizer = rmsprop", "hidden = 5\nhidden = 6", "model = three"] {
            assert!(matches!(RunConfig::parse(text, Path::new("")), Err(Error::Config(_))), "{text}");
        }
        let err = RunConfig::parse("hiden = 5", Path::new("")).unwrap_err().to_string();
        assert!(err.contains("line 1") && err.contains("hiden"), "{err}");
    }

    #[test]
    fn missing_paths_are_named() {
        let c = RunConfig::parse("glove_path = /no/such/glove.txt", Path::new("")).unwrap();
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("/no/such/glove.txt"), "{err}");
        let c = RunConfig::parse("batch_size = 0", Path::new("")).unwrap();
        assert!(c.validate().is_err());
    }
}
