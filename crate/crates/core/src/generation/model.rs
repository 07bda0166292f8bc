//! Text-to-text model interface and two implementations: a memorizing
//! nearest-neighbour baseline and an adapter around an external command.

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GenError, GenerationExample};
use crate::metrics::rouge_tokens;

#[derive(Debug, Error)]
#[error("{0}")]
pub struct ModelError(pub String);

/// Decoding settings, recorded next to every output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub max_output_words: usize,
    pub num_beams: usize,
    pub do_sample: bool,
    pub seed: u64,
}

impl Default for DecodingParams {
    /// Greedy decoding.
    fn default() -> Self {
        DecodingParams {
            max_output_words: 256,
            num_beams: 1,
            do_sample: false,
            seed: 0,
        }
    }
}

pub trait Seq2Seq: Send {
    fn name(&self) -> String;
    /// Longest accepted input, in whitespace tokens.
    fn max_input_words(&self) -> usize;
    /// Whether one instance may serve concurrent calls.
    fn reentrant(&self) -> bool {
        false
    }
    fn generate(&mut self, input: &str, params: &DecodingParams) -> Result<String, ModelError>;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedText {
    pub id: String,
    pub text: String,
    pub model: String,
    pub params: DecodingParams,
    pub kept_blocks: usize,
}

pub fn generate_span(
    ex: &GenerationExample,
    model: &mut dyn Seq2Seq,
    params: &DecodingParams,
) -> Result<GeneratedText, GenError> {
    let input = ex.assemble(Some(model.max_input_words()));
    run(ex.id.clone(), input.text, input.kept_blocks, model, params)
}

fn run(
    id: String,
    input: String,
    kept_blocks: usize,
    model: &mut dyn Seq2Seq,
    params: &DecodingParams,
) -> Result<GeneratedText, GenError> {
    let text = model
        .generate(&input, params)
        .map_err(|source| GenError::Model { id: id.clone(), source })?;
    let text: String = text.split_whitespace().take(params.max_output_words).collect::<Vec<_>>().join(" ");
    if text.is_empty() {
        return Err(GenError::EmptyOutput { id });
    }
    Ok(GeneratedText {
        id,
        text,
        model: model.name(),
        params: params.clone(),
        kept_blocks,
    })
}

/// Generates for every example in order. Inputs are assembled on a worker
/// thread and handed over through a queue holding at most `queue` items;
/// the model itself is only ever called from the current thread.
pub fn generate_all(
    examples: &[GenerationExample],
    model: &mut dyn Seq2Seq,
    params: &DecodingParams,
    queue: usize,
) -> Vec<Result<GeneratedText, GenError>> {
    let max = model.max_input_words();
    let (tx, rx) = mpsc::sync_channel(queue.max(1));
    std::thread::scope(|s| {
        s.spawn(move || {
            for ex in examples {
                let a = ex.assemble(Some(max));
                if tx.send((ex.id.clone(), a.text, a.kept_blocks)).is_err() {
                    break;
                }
            }
        });
        rx.into_iter()
            .map(|(id, input, kept)| run(id, input, kept, model, params))
            .collect()
    })
}

/// Returns the target of the most similar training input (unigram F1 over
/// ROUGE tokens; ties go to the earliest). It memorizes its training set
/// exactly, which makes it a harness check rather than a generator.
#[derive(Clone, Debug, Default)]
pub struct NearestNeighborSeq2Seq {
    memory: Vec<(HashMap<String, usize>, usize, String)>,
    max_input_words: usize,
}

fn bag(text: &str) -> (HashMap<String, usize>, usize) {
    let toks = rouge_tokens(text);
    let n = toks.len();
    let mut m = HashMap::new();
    for t in toks {
        *m.entry(t).or_insert(0) += 1;
    }
    (m, n)
}

impl NearestNeighborSeq2Seq {
    pub fn new(max_input_words: usize) -> Self {
        NearestNeighborSeq2Seq {
            memory: Vec::new(),
            max_input_words,
        }
    }

    pub fn fit<I, S, T>(&mut self, pairs: I)
    where
        I: IntoIterator<Item = (S, T)>,
        S: AsRef<str>,
        T: Into<String>,
    {
        for (input, target) in pairs {
            let (b, n) = bag(input.as_ref());
            self.memory.push((b, n, target.into()));
        }
    }

    /// Trains on examples assembled with this model's input limit.
    pub fn fit_examples(&mut self, examples: &[GenerationExample]) {
        let max = self.max_input_words;
        self.fit(examples.iter().map(|e| (e.assemble(Some(max)).text, e.gold_target.clone())));
    }

    pub fn len(&self) -> usize {
        self.memory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memory.is_empty()
    }
}

impl Seq2Seq for NearestNeighborSeq2Seq {
    fn name(&self) -> String {
        "nearest-neighbour".into()
    }

    fn max_input_words(&self) -> usize {
        self.max_input_words
    }

    fn reentrant(&self) -> bool {
        true
    }

    fn generate(&mut self, input: &str, _params: &DecodingParams) -> Result<String, ModelError> {
        let (q, qn) = bag(input);
        let mut best: Option<(f64, &str)> = None;
        for (m, n, target) in &self.memory {
            let overlap: usize = q.iter().map(|(t, c)| (*c).min(m.get(t).copied().unwrap_or(0))).sum();
            let f1 = if qn + n == 0 { 0.0 } else { 2.0 * overlap as f64 / (qn + n) as f64 };
            if best.is_none_or(|(b, _)| f1 > b) {
                best = Some((f1, target));
            }
        }
        best.map(|(_, t)| t.to_string())
            .ok_or_else(|| ModelError("model has no training examples".into()))
    }
}

/// Runs an external program once per input. The program receives one JSON
/// object `{"input": ..., "params": ...}` on stdin and writes the generated
/// text to stdout.
#[derive(Clone, Debug)]
pub struct CommandSeq2Seq {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub max_input_words: usize,
}

#[derive(Serialize)]
struct CommandRequest<'a> {
    input: &'a str,
    params: &'a DecodingParams,
}

impl Seq2Seq for CommandSeq2Seq {
    fn name(&self) -> String {
        format!("command:{}", self.program.display())
    }

    fn max_input_words(&self) -> usize {
        self.max_input_words
    }

    fn generate(&mut self, input: &str, params: &DecodingParams) -> Result<String, ModelError> {
        let err = |what: &str, e: &dyn std::fmt::Display| ModelError(format!("{}: {what}: {e}", self.program.display()));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| err("spawn", &e))?;
        let request = serde_json::to_vec(&CommandRequest { input, params }).map_err(|e| err("encode", &e))?;
        if let Some(mut stdin) = child.stdin.take() {
            stdin.write_all(&request).map_err(|e| err("write", &e))?;
        }
        let out = child.wait_with_output().map_err(|e| err("wait", &e))?;
        if !out.status.success() {
            let stderr = String::from_utf8_lossy(&out.stderr);
            return Err(err("exit", &format!("{} {}", out.status, stderr.trim())));
        }
        String::from_utf8(out.stdout)
            .map(|s| s.trim().to_string())
            .map_err(|e| err("decode", &e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::tests::{fixture, metadata};
    use crate::generation::{build_generation_example, TargetUnit};

    fn examples() -> Vec<GenerationExample> {
        let lp = fixture();
        lp.spans
            .iter()
            .enumerate()
            .map(|(i, s)| {
                build_generation_example(format!("e{i}"), &lp, s, TargetUnit::Span, "Intro text.", &metadata())
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn memorizes_training_pairs() {
        let exs = examples();
        let mut m = NearestNeighborSeq2Seq::new(1000);
        m.fit_examples(&exs);
        let params = DecodingParams::default();
        for ex in &exs {
            assert_eq!(generate_span(ex, &mut m, &params).unwrap().text, ex.gold_target);
        }
        let all = generate_all(&exs, &mut m, &params, 1);
        let again = generate_all(&exs, &mut m, &params, 4);
        assert_eq!(all.len(), 2);
        assert_eq!(
            all.into_iter().map(Result::unwrap).collect::<Vec<_>>(),
            again.into_iter().map(Result::unwrap).collect::<Vec<_>>()
        );
    }

    #[test]
    fn empty_model_error_names_example() {
        let mut m = NearestNeighborSeq2Seq::new(10);
        let err = generate_span(&examples()[0], &mut m, &DecodingParams::default()).unwrap_err();
        assert!(err.to_string().starts_with("example e0:"), "{err}");
    }

    #[test]
    fn command_adapter() {
        let mut m = CommandSeq2Seq {
            program: "sh".into(),
            args: vec!["-c".into(), "cat >/dev/null; echo ' generated text '".into()],
            max_input_words: 100,
        };
        let out = generate_span(&examples()[0], &mut m, &DecodingParams::default()).unwrap();
        assert_eq!(out.text, "generated text");
        let mut failing = CommandSeq2Seq {
            program: "sh".into(),
            args: vec!["-c".into(), "cat >/dev/null; echo boom >&2; exit 3".into()],
            max_input_words: 100,
        };
        let err = generate_span(&examples()[1], &mut failing, &DecodingParams::default()).unwrap_err();
        assert!(matches!(err, GenError::Model { ref id, .. } if id == "e1"));
        assert!(err.to_string().contains("boom"));
    }
}
