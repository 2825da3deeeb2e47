//! Seeded synthetic stand-ins for the question corpus, the embedding file and
//! the question/answer set. Used by tests, the acceptance suite and demos when
//! the real corpora are not at hand.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dataset::{LabelTaxonomy, LabeledQuestion, TREC_MAIN_CLASSES};
use crate::error::{Error, Result};
use crate::models::{AnswerVocab, QaExample};
use crate::numerics::{Rng, Vector};
use crate::textpipe::{embed, EmbeddingTable};

/// Word that appears in questions but never in the synthetic embedding table.
pub const OOV_WORD: &str = "unseenword";

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub subs_per_main: usize,
    /// Distinct label-revealing words per fine label.
    pub cues_per_label: usize,
    pub fillers: usize,
    pub dim: usize,
    pub train: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            subs_per_main: 2,
            cues_per_label: 3,
            fillers: 30,
            dim: 16,
            train: 400,
            test: 100,
            seed: 7,
        }
    }
}

/// TREC-shaped labelled questions: each question holds filler words and one
/// cue word that determines its fine label.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub taxonomy: LabelTaxonomy,
    pub embeddings: EmbeddingTable<f64>,
    pub train: Vec<LabeledQuestion>,
    pub test: Vec<LabeledQuestion>,
}

fn random_table(words: &[String], dim: usize, rng: &mut Rng) -> Result<EmbeddingTable<f64>> {
    let mut sorted: Vec<&String> = words.iter().collect();
    sorted.sort();
    let mut table = EmbeddingTable::new(dim);
    for w in sorted {
        let v: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        table.insert(w, &v)?;
    }
    Ok(table)
}

fn filler_words(n: usize) -> Vec<String> {
    (0..n).map(|k| format!("filler{k}")).collect()
}

pub fn corpus(spec: &CorpusSpec) -> Result<Corpus> {
    if spec.subs_per_main == 0 || spec.cues_per_label == 0 || spec.fillers == 0 || spec.dim == 0 {
        return Err(Error::InvalidArgument("corpus sizes must be positive".into()));
    }
    let mut rng = Rng::seed_from_u64(spec.seed);
    let labels: Vec<String> = TREC_MAIN_CLASSES
        .iter()
        .flat_map(|m| (0..spec.subs_per_main).map(move |s| format!("{m}:sub{s}")))
        .collect();
    let taxonomy = LabelTaxonomy::from_labels(&labels)?;
    let cue = |fine: usize, j: usize| format!("cue{fine}x{j}");
    let fillers = filler_words(spec.fillers);
    let mut vocab = fillers.clone();
    for fine in 0..taxonomy.num_fine() {
        vocab.extend((0..spec.cues_per_label).map(|j| cue(fine, j)));
    }
    vocab.push("?".into());
    let embeddings = random_table(&vocab, spec.dim, &mut rng)?;

    let question = |rng: &mut Rng| {
        let fine = rng.below(taxonomy.num_fine());
        let len = 2 + rng.below(6);
        let mut tokens: Vec<String> = (0..len)
            .map(|_| {
                if rng.below(20) == 0 {
                    OOV_WORD.to_string()
                } else {
                    fillers[rng.below(fillers.len())].clone()
                }
            })
            .collect();
        tokens.insert(rng.below(len + 1), cue(fine, rng.below(spec.cues_per_label)));
        tokens.push("?".into());
        LabeledQuestion {
            text: tokens.join(" "),
            tokens,
            main: taxonomy.main_of(fine),
            fine,
        }
    };
    let train = (0..spec.train).map(|_| question(&mut rng)).collect();
    let test = (0..spec.test).map(|_| question(&mut rng)).collect();
    Ok(Corpus {
        taxonomy,
        embeddings,
        train,
        test,
    })
}

/// Writes questions in the `MAIN:sub question` line format.
pub fn write_trec(path: impl AsRef<Path>, taxonomy: &LabelTaxonomy, questions: &[LabeledQuestion]) -> Result<()> {
    let mut out = String::new();
    for q in questions {
        let _ = writeln!(out, "{} {}", taxonomy.fine_labels()[q.fine], q.text);
    }
    fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
}

/// Writes a table in the `word v1 … v_dim` text format, words sorted.
pub fn write_glove(path: impl AsRef<Path>, table: &EmbeddingTable<f64>) -> Result<()> {
    let mut words: Vec<&str> = table.words().collect();
    words.sort_unstable();
    let mut out = String::new();
    for w in words {
        out.push_str(w);
        for v in table.get(w).unwrap_or_default() {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaPair {
    pub question: Vec<String>,
    pub main: usize,
    pub fine: usize,
    pub answer: Vec<String>,
}

impl QaPair {
    /// Builds a responder example whose conditioning vector is the two-hot
    /// encoding of the pair's labels.
    pub fn example(&self, qa: &QaSet) -> Result<QaExample<f64>> {
        self.example_with_main(qa, self.main)
    }

    /// As [`QaPair::example`] with the main class replaced.
    pub fn example_with_main(&self, qa: &QaSet, main: usize) -> Result<QaExample<f64>> {
        let mut cond = Vector::zeros(qa.num_main + qa.num_fine);
        cond[main] = 1.0;
        cond[qa.num_main + self.fine] = 1.0;
        Ok(QaExample {
            cond,
            xs: embed(&qa.embeddings, &self.question),
            answer: qa.vocab.encode(&self.answer)?,
        })
    }
}

/// Question/answer pairs whose answer is a fixed function of the main class
/// and a topic word in the question, so changing the class changes the
/// answer.
#[derive(Debug, Clone)]
pub struct QaSet {
    pub embeddings: EmbeddingTable<f64>,
    pub vocab: AnswerVocab,
    pub num_main: usize,
    pub num_fine: usize,
    pub train: Vec<QaPair>,
    pub held_out: Vec<QaPair>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaSpec {
    pub train: usize,
    pub held_out: usize,
    pub topics: usize,
    /// Size of the answer-word pool (at least the number of main classes).
    pub answer_words: usize,
    pub dim: usize,
    pub seed: u64,
}

impl Default for QaSpec {
    fn default() -> Self {
        Self {
            train: 500,
            held_out: 100,
            topics: 8,
            answer_words: 20,
            dim: 16,
            seed: 11,
        }
    }
}

pub fn qa_set(spec: &QaSpec) -> Result<QaSet> {
    let num_main = TREC_MAIN_CLASSES.len();
    let subs = 2;
    if spec.topics == 0 || spec.answer_words < num_main || spec.dim == 0 {
        return Err(Error::InvalidArgument("need topics > 0 and an answer pool at least as large as the class count".into()));
    }
    let mut rng = Rng::seed_from_u64(spec.seed);
    let pool: Vec<String> = (0..spec.answer_words).map(|k| format!("ans{k}")).collect();
    // table[main][topic]: first tokens differ across main classes per topic.
    let mut table = vec![vec![Vec::new(); spec.topics]; num_main];
    for topic in 0..spec.topics {
        let mut order: Vec<usize> = (0..pool.len()).collect();
        rng.shuffle(&mut order);
        for (main, row) in table.iter_mut().enumerate() {
            let mut answer = vec![pool[order[main]].clone()];
            if rng.below(2) == 0 {
                answer.push(pool[rng.below(pool.len())].clone());
            }
            row[topic] = answer;
        }
    }
    let topic_word = |k: usize| format!("topic{k}");
    let fillers = filler_words(20);
    let mut words = fillers.clone();
    words.extend((0..spec.topics).map(topic_word));
    words.push("?".into());
    let embeddings = random_table(&words, spec.dim, &mut rng)?;

    let pair = |rng: &mut Rng| {
        let (main, topic) = (rng.below(num_main), rng.below(spec.topics));
        let len = 3 + rng.below(4);
        let mut question: Vec<String> = (0..len).map(|_| fillers[rng.below(fillers.len())].clone()).collect();
        question.insert(rng.below(len + 1), topic_word(topic));
        question.push("?".into());
        QaPair {
            question,
            main,
            fine: main * subs + rng.below(subs),
            answer: table[main][topic].clone(),
        }
    };
    let train: Vec<QaPair> = (0..spec.train).map(|_| pair(&mut rng)).collect();
    let held_out = (0..spec.held_out).map(|_| pair(&mut rng)).collect();
    let vocab = AnswerVocab::from_answers(train.iter().map(|p| p.answer.clone()));
    Ok(QaSet {
        embeddings,
        vocab,
        num_main,
        num_fine: num_main * subs,
        train,
        held_out,
    })
}

/// Writes pairs in the `question<TAB>answer` format.
pub fn write_qa(path: impl AsRef<Path>, pairs: &[QaPair]) -> Result<()> {
    let mut out = String::new();
    for p in pairs {
        let _ = writeln!(out, "{}\t{}", p.question.join(" "), p.answer.join(" "));
    }
    fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
}
