//! Binary model file: `ILSTM1` magic, a JSON metadata block and a list of
//! named little-endian `f32` tensors.
//!
//! ```text
//! magic      6 bytes  "ILSTM1"
//! meta_len   u32
//! meta       meta_len bytes of JSON
//! count      u32
//! count × { name_len u32, name, ndims u32, dims u32 × ndims, f32 × prod(dims) }
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use ilstm_core::dataset::LabelTaxonomy;
use ilstm_core::models::{AnswerVocab, Classifier, ModelKind, Responder};
use ilstm_core::numerics::Rng;
use ilstm_core::params::Parameters;
use ilstm_core::{Error, Result};

pub const MAGIC: &[u8; 6] = b"ILSTM1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoredKind {
    One,
    Two,
    Responder,
}

impl From<ModelKind> for StoredKind {
    fn from(k: ModelKind) -> Self {
        match k {
            ModelKind::One => StoredKind::One,
            ModelKind::Two => StoredKind::Two,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub kind: StoredKind,
    pub hidden: usize,
    pub input_dim: usize,
    pub main_labels: Vec<String>,
    pub fine_labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_vocab: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cond_width: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelContainer {
    pub metadata: Metadata,
    pub tensors: Vec<Tensor>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Container(msg.into())
}

fn tensors_of<P: Parameters<f64>>(model: &P) -> Vec<Tensor> {
    model
        .params()
        .into_iter()
        .map(|p| Tensor {
            name: p.name,
            dims: p.dims,
            data: p.data.iter().map(|&x| x as f32).collect(),
        })
        .collect()
}

impl ModelContainer {
    pub fn from_classifier(model: &Classifier<f64>, taxonomy: &LabelTaxonomy) -> Self {
        Self {
            metadata: Metadata {
                kind: model.kind().into(),
                hidden: model.hidden(),
                input_dim: model.input(),
                main_labels: taxonomy.main_classes().to_vec(),
                fine_labels: taxonomy.fine_labels().to_vec(),
                answer_vocab: None,
                cond_width: None,
            },
            tensors: tensors_of(model),
        }
    }

    /// `taxonomy` is that of the classifier whose outputs condition the
    /// responder.
    pub fn from_responder(model: &Responder<f64>, taxonomy: &LabelTaxonomy) -> Self {
        Self {
            metadata: Metadata {
                kind: StoredKind::Responder,
                hidden: model.hidden(),
                input_dim: model.input(),
                main_labels: taxonomy.main_classes().to_vec(),
                fine_labels: taxonomy.fine_labels().to_vec(),
                answer_vocab: Some(model.vocab.tokens().to_vec()),
                cond_width: Some(model.cond_width()),
            },
            tensors: tensors_of(model),
        }
    }

    pub fn taxonomy(&self) -> Result<LabelTaxonomy> {
        LabelTaxonomy::from_parts(self.metadata.main_labels.clone(), self.metadata.fine_labels.clone())
    }

    /// Copies the stored tensors into `model`, which must have exactly the
    /// same names and shapes.
    fn fill<P: Parameters<f64>>(&self, model: &mut P) -> Result<()> {
        let views = model.params_mut();
        if views.len() != self.tensors.len() {
            return Err(corrupt(format!("expected {} tensors, found {}", views.len(), self.tensors.len())));
        }
        for (view, t) in views.into_iter().zip(&self.tensors) {
            if view.name != t.name || view.dims != t.dims {
                return Err(corrupt(format!(
                    "expected tensor {} {:?}, found {} {:?}",
                    view.name, view.dims, t.name, t.dims
                )));
            }
            for (dst, &src) in view.data.iter_mut().zip(&t.data) {
                *dst = f64::from(src);
            }
        }
        Ok(())
    }

    pub fn to_classifier(&self) -> Result<(Classifier<f64>, LabelTaxonomy)> {
        let m = &self.metadata;
        let kind = match m.kind {
            StoredKind::One => ModelKind::One,
            StoredKind::Two => ModelKind::Two,
            StoredKind::Responder => return Err(corrupt("file holds a responder, not a classifier")),
        };
        let taxonomy = self.taxonomy()?;
        let mut rng = Rng::seed_from_u64(0);
        let mut model = Classifier::new(kind, m.hidden, m.input_dim, taxonomy.num_main(), taxonomy.num_fine(), &mut rng)?;
        self.fill(&mut model)?;
        Ok((model, taxonomy))
    }

    pub fn to_responder(&self) -> Result<Responder<f64>> {
        let m = &self.metadata;
        if m.kind != StoredKind::Responder {
            return Err(corrupt("file holds a classifier, not a responder"));
        }
        let vocab = AnswerVocab::from_tokens(m.answer_vocab.clone().ok_or_else(|| corrupt("missing answer vocabulary"))?)?;
        let cond = m.cond_width.ok_or_else(|| corrupt("missing conditioning width"))?;
        let mut model = Responder::new(m.hidden, m.input_dim, cond, vocab, &mut Rng::seed_from_u64(0))?;
        self.fill(&mut model)?;
        Ok(model)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&self.metadata).map_err(|e| corrupt(e.to_string()))?;
        let mut out = Vec::with_capacity(16 + meta.len() + self.tensors.iter().map(|t| 4 * t.data.len() + 64).sum::<usize>());
        let put_u32 = |out: &mut Vec<u8>, v: usize| -> Result<()> {
            let v = u32::try_from(v).map_err(|_| corrupt(format!("{v} does not fit in 32 bits")))?;
            out.extend_from_slice(&v.to_le_bytes());
            Ok(())
        };
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, meta.len())?;
        out.extend_from_slice(&meta);
        put_u32(&mut out, self.tensors.len())?;
        for t in &self.tensors {
            if t.dims.iter().product::<usize>() != t.data.len() {
                return Err(corrupt(format!("tensor {} has dims {:?} but {} values", t.name, t.dims, t.data.len())));
            }
            put_u32(&mut out, t.name.len())?;
            out.extend_from_slice(t.name.as_bytes());
            put_u32(&mut out, t.dims.len())?;
            for &d in &t.dims {
                put_u32(&mut out, d)?;
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(corrupt("not a model file (bad magic)"));
        }
        let meta_len = r.u32()?;
        let metadata: Metadata =
            serde_json::from_slice(r.take(meta_len)?).map_err(|e| corrupt(format!("bad metadata: {e}")))?;
        let count = r.u32()?;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = r.u32()?;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| corrupt("tensor name is not UTF-8"))?
                .to_owned();
            let ndims = r.u32()?;
            let dims = (0..ndims).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            let n = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| corrupt("tensor size overflows"))?;
            let raw = r.take(n.checked_mul(4).ok_or_else(|| corrupt("tensor size overflows"))?)?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            tensors.push(Tensor { name, dims, data });
        }
        if r.pos != bytes.len() {
            return Err(corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { metadata, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_bytes(&bytes).map_err(|e| corrupt(format!("{}: {e}", path.display())))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| corrupt("unexpected end of file"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taxonomy() -> LabelTaxonomy {
        LabelTaxonomy::from_labels(["HUM:ind", "HUM:gr", "LOC:city", "NUM:date"]).unwrap()
    }

    #[test]
    fn classifier_round_trip() {
        let t = taxonomy();
        let mut rng = Rng::seed_from_u64(1);
        for kind in [ModelKind::One, ModelKind::Two] {
            let model = Classifier::<f64>::new(kind, 5, 7, t.num_main(), t.num_fine(), &mut rng).unwrap();
            let c = ModelContainer::from_classifier(&model, &t);
            let bytes = c.to_bytes().unwrap();
            let back = ModelContainer::from_bytes(&bytes).unwrap();
            assert_eq!(back, c);
            let (loaded, lt) = back.to_classifier().unwrap();
            assert_eq!(lt, t);
            assert_eq!(loaded.kind(), kind);
            for (a, b) in model.flatten().iter().zip(loaded.flatten()) {
                assert!((a - b).abs() < 1e-6);
            }
            let again = ModelContainer::from_classifier(&loaded, &lt).to_bytes().unwrap();
            assert_eq!(again, bytes);
        }
    }

    #[test]
    fn responder_round_trip() {
        let vocab = AnswerVocab::from_answers([vec!["north"], vec!["march", "13"]]);
        let r = Responder::<f64>::new(3, 4, 7, vocab, &mut Rng::seed_from_u64(2)).unwrap();
        let c = ModelContainer::from_responder(&r, &taxonomy());
        let bytes = c.to_bytes().unwrap();
        let loaded = ModelContainer::from_bytes(&bytes).unwrap().to_responder().unwrap();
        assert_eq!(loaded.vocab, r.vocab);
        assert_eq!(loaded.cond_width(), 7);
        assert_eq!(ModelContainer::from_responder(&loaded, &taxonomy()).to_bytes().unwrap(), bytes);
        assert!(c.to_classifier().is_err());
    }

    #[test]
    fn rejects_bad_input() {
        let t = taxonomy();
        let model = Classifier::<f64>::new(ModelKind::Two, 2, 3, t.num_main(), t.num_fine(), &mut Rng::seed_from_u64(3)).unwrap();
        let bytes = ModelContainer::from_classifier(&model, &t).to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(ModelContainer::from_bytes(&bad), Err(Error::Container(m)) if m.contains("magic")));
        assert!(ModelContainer::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(ModelContainer::from_bytes(&longer).is_err());
        assert!(ModelContainer::from_bytes(&[]).is_err());

        let mut c = ModelContainer::from_classifier(&model, &t);
        c.tensors[0].name = "lstm.w_x".into();
        assert!(c.to_classifier().is_err());
        let mut c = ModelContainer::from_classifier(&model, &t);
        c.tensors.pop();
        assert!(c.to_classifier().is_err());
    }

    #[test]
    fn metadata_is_plain_json() {
        let t = taxonomy();
        let model = Classifier::<f64>::new(ModelKind::Two, 100, 3, t.num_main(), t.num_fine(), &mut Rng::seed_from_u64(4)).unwrap();
        let bytes = ModelContainer::from_classifier(&model, &t).to_bytes().unwrap();
        let len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let meta: serde_json::Value = serde_json::from_slice(&bytes[10..10 + len]).unwrap();
        assert_eq!(meta["kind"], "two");
        assert_eq!(meta["hidden"], 100);
        assert_eq!(meta["main_labels"][0], "HUM");
    }
}
