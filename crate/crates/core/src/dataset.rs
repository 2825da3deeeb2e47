//! TREC question files, the two-level label taxonomy and batching.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::numerics::Rng;
use crate::textpipe::clean_and_tokenize;

/// Main classes of the TREC question taxonomy, in index order.
pub const TREC_MAIN_CLASSES: [&str; 6] = ["ABBR", "DESC", "ENTY", "HUM", "LOC", "NUM"];

/// Number of fine `MAIN:sub` labels in the TREC taxonomy.
pub const TREC_FINE_LABELS: usize = 50;

/// Human-readable name of a TREC main class.
pub fn display_name(main: &str) -> &str {
    match main {
        "ABBR" => "abbreviation",
        "DESC" => "description",
        "ENTY" => "entity",
        "HUM" => "human",
        "LOC" => "location",
        "NUM" => "numeric",
        other => other,
    }
}

/// Splits `MAIN:sub` into its two parts.
pub fn parse_label(raw: &str) -> Result<(&str, &str)> {
    let mut parts = raw.split(':');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(main), Some(sub), None) if !main.is_empty() && !sub.is_empty() => Ok((main, sub)),
        _ => Err(Error::MalformedLabel(raw.to_owned())),
    }
}

/// Main classes and fine labels, each sorted lexicographically so indices are
/// a pure function of the label set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTaxonomy {
    main: Vec<String>,
    fine: Vec<String>,
    fine_to_main: Vec<usize>,
}

impl LabelTaxonomy {
    /// Builds a taxonomy from any collection of `MAIN:sub` labels (duplicates
    /// are fine).
    pub fn from_labels<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut fine = BTreeSet::new();
        for label in labels {
            let label = label.as_ref();
            parse_label(label)?;
            fine.insert(label.to_owned());
        }
        if fine.is_empty() {
            return Err(Error::Taxonomy("no labels".into()));
        }
        let main: BTreeSet<String> = fine.iter().map(|l| parse_label(l).unwrap().0.to_owned()).collect();
        let main: Vec<String> = main.into_iter().collect();
        let fine: Vec<String> = fine.into_iter().collect();
        let fine_to_main = fine
            .iter()
            .map(|l| {
                let m = parse_label(l).unwrap().0;
                main.iter().position(|x| x == m).unwrap()
            })
            .collect();
        Ok(Self { main, fine, fine_to_main })
    }

    /// Reconstructs a taxonomy from stored label lists, checking they are
    /// sorted and consistent.
    pub fn from_parts(main: Vec<String>, fine: Vec<String>) -> Result<Self> {
        let t = Self::from_labels(&fine)?;
        if t.main != main || t.fine != fine {
            return Err(Error::Taxonomy("stored label lists are not in canonical order".into()));
        }
        Ok(t)
    }

    /// Builds the taxonomy and checks it has the TREC shape: exactly the six
    /// canonical main classes and 50 fine labels.
    pub fn trec<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let t = Self::from_labels(labels)?;
        t.validate_trec()?;
        Ok(t)
    }

    pub fn validate_trec(&self) -> Result<()> {
        if self.main != TREC_MAIN_CLASSES {
            return Err(Error::Taxonomy(format!(
                "expected main classes {TREC_MAIN_CLASSES:?}, found {:?}",
                self.main
            )));
        }
        if self.fine.len() != TREC_FINE_LABELS {
            return Err(Error::Taxonomy(format!(
                "expected {TREC_FINE_LABELS} fine labels, found {}",
                self.fine.len()
            )));
        }
        Ok(())
    }

    pub fn main_classes(&self) -> &[String] {
        &self.main
    }

    pub fn fine_labels(&self) -> &[String] {
        &self.fine
    }

    pub fn num_main(&self) -> usize {
        self.main.len()
    }

    pub fn num_fine(&self) -> usize {
        self.fine.len()
    }

    pub fn main_index(&self, name: &str) -> Option<usize> {
        self.main.binary_search_by(|m| m.as_str().cmp(name)).ok()
    }

    pub fn fine_index(&self, label: &str) -> Option<usize> {
        self.fine.binary_search_by(|m| m.as_str().cmp(label)).ok()
    }

    /// Main class index of a fine label index.
    pub fn main_of(&self, fine: usize) -> usize {
        self.fine_to_main[fine]
    }
}

/// Example with access to its labels.
pub trait Labeled {
    fn main_class(&self) -> usize;
    fn fine_label(&self) -> usize;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledQuestion {
    pub text: String,
    pub tokens: Vec<String>,
    pub main: usize,
    pub fine: usize,
}

impl Labeled for LabeledQuestion {
    fn main_class(&self) -> usize {
        self.main
    }

    fn fine_label(&self) -> usize {
        self.fine
    }
}

/// Decodes one line as UTF-8, falling back to Latin-1.
fn decode_line(bytes: &[u8], path: &Path, lineno: usize) -> String {
    match std::str::from_utf8(bytes) {
        Ok(s) => s.to_owned(),
        Err(_) => {
            warn!("{}:{lineno}: not valid UTF-8, decoding as Latin-1", path.display());
            bytes.iter().map(|&b| b as char).collect()
        }
    }
}

/// Non-blank lines of a file with their 1-based line numbers.
fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(bytes
        .split(|&b| b == b'\n')
        .enumerate()
        .map(|(n, raw)| (n + 1, decode_line(raw, path, n + 1)))
        .map(|(n, line)| (n, line.trim_end_matches('\r').to_owned()))
        .filter(|(_, line)| !line.trim().is_empty())
        .collect())
}

fn split_line<'a>(line: &'a str, path: &Path, lineno: usize) -> Result<(&'a str, &'a str)> {
    let line = line.trim_start();
    match line.split_once(char::is_whitespace) {
        Some((label, question)) => Ok((label, question.trim())),
        None => Err(Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: "expected `MAIN:sub question text`".into(),
        }),
    }
}

/// Labels appearing in a TREC file, in file order.
pub fn scan_labels(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let mut labels = Vec::new();
    for (lineno, line) in read_lines(path)? {
        let (label, _) = split_line(&line, path, lineno)?;
        labels.push(label.to_owned());
    }
    Ok(labels)
}

/// Reads a TREC file (`MAIN:sub question…` per line) against `taxonomy`.
pub fn load_trec(path: impl AsRef<Path>, taxonomy: &LabelTaxonomy) -> Result<Vec<LabeledQuestion>> {
    let path = path.as_ref();
    let lines = read_lines(path)?;
    let mut out = Vec::with_capacity(lines.len());
    for (lineno, line) in lines {
        let (label, question) = split_line(&line, path, lineno)?;
        parse_label(label).map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: format!("malformed label {label:?}"),
        })?;
        let fine = taxonomy.fine_index(label).ok_or_else(|| Error::UnknownLabel {
            label: label.to_owned(),
            line: lineno,
        })?;
        let tokens = clean_and_tokenize(question);
        if tokens.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: "question is empty after cleaning".into(),
            });
        }
        out.push(LabeledQuestion {
            text: question.to_owned(),
            tokens,
            main: taxonomy.main_of(fine),
            fine,
        });
    }
    Ok(out)
}

/// Question/answer pair for the responder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaRecord {
    pub question: Vec<String>,
    pub answer: Vec<String>,
}

/// Reads `question<TAB>answer` lines; both sides go through the tokenizer.
/// An empty answer is allowed (the responder then only learns the end symbol).
pub fn load_qa(path: impl AsRef<Path>) -> Result<Vec<QaRecord>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (lineno, line) in read_lines(path)? {
        let parse_err = |message: &str| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: message.to_owned(),
        };
        let (question, answer) = line.split_once('\t').ok_or_else(|| parse_err("expected `question<TAB>answer`"))?;
        let question = clean_and_tokenize(question);
        if question.is_empty() {
            return Err(parse_err("question is empty after cleaning"));
        }
        out.push(QaRecord {
            question,
            answer: clean_and_tokenize(answer),
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
            message: "no question/answer pairs".into(),
        });
    }
    Ok(out)
}

/// Seeded split stratified by main class; returns `(train, validation)`.
///
/// The validation side holds `round(n · fraction)` examples, apportioned so
/// each class is within one example of its proportional share. Both sides
/// keep the input's relative order.
pub fn split_validation<E: Labeled + Clone>(data: &[E], fraction: f64, rng: &mut Rng) -> Result<(Vec<E>, Vec<E>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("validation fraction must be in (0, 1), got {fraction}")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, e) in data.iter().enumerate() {
        by_class.entry(e.main_class()).or_default().push(i);
    }
    // Largest-remainder apportionment: the validation side has
    // round(n · fraction) examples and every class is within one of its share.
    let total = (data.len() as f64 * fraction).round() as usize;
    let shares: Vec<f64> = by_class.values().map(|m| m.len() as f64 * fraction).collect();
    let mut takes: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| (shares[b] - shares[b].floor()).total_cmp(&(shares[a] - shares[a].floor())).then(a.cmp(&b)));
    let mut missing = total.saturating_sub(takes.iter().sum());
    for &c in order.iter().cycle().take(order.len()) {
        if missing == 0 {
            break;
        }
        takes[c] += 1;
        missing -= 1;
    }
    let mut in_val = vec![false; data.len()];
    for (members, take) in by_class.values_mut().zip(takes) {
        rng.shuffle(members);
        for &i in &members[..take] {
            in_val[i] = true;
        }
    }
    let (train, val): (Vec<_>, Vec<_>) = data.iter().zip(&in_val).partition(|(_, &v)| !v);
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "validation fraction {fraction} leaves an empty side ({} train / {} validation)",
            train.len(),
            val.len()
        )));
    }
    Ok((
        train.into_iter().map(|(e, _)| e.clone()).collect(),
        val.into_iter().map(|(e, _)| e.clone()).collect(),
    ))
}

/// A group of examples processed together; sequences are not padded.
#[derive(Debug, Clone)]
pub struct Batch<'a, E> {
    pub items: Vec<&'a E>,
}

impl<'a, E> Batch<'a, E> {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Shuffles `data` with `rng` and cuts it into batches; the last one may be
/// short. Call once per epoch with the same generator.
pub fn batches<'a, E>(data: &'a [E], batch_size: usize, rng: &mut Rng) -> Result<Vec<Batch<'a, E>>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    rng.shuffle(&mut order);
    Ok(order
        .chunks(batch_size)
        .map(|chunk| Batch {
            items: chunk.iter().map(|&i| &data[i]).collect(),
        })
        .collect())
}
