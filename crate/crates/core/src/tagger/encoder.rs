//! Token encoders. The bundled encoder is frozen: piece embeddings are
//! derived from a hash of the piece string, so it needs no weights on disk.

use std::collections::HashMap;
use std::ops::Range;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TaggerError;
use crate::corpus::Paragraph;
use crate::text::{fnv1a, CharIndex};

pub const HASH_ENCODER: &str = "hash-subword";

/// Longest subword piece, in characters.
pub const MAX_PIECE_CHARS: usize = 6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkPolicy {
    /// Chunk only paragraphs longer than the window.
    #[default]
    Auto,
    /// Always go through the chunk planner.
    Always,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub encoder_name: String,
    /// Window size in subword pieces.
    pub max_tokens: usize,
    #[serde(default)]
    pub chunking: ChunkPolicy,
    /// Width of each hashed embedding block.
    pub dim: usize,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            encoder_name: HASH_ENCODER.into(),
            max_tokens: 512,
            chunking: ChunkPolicy::Auto,
            dim: 32,
            seed: 17,
        }
    }
}

/// Tokens in, one vector per token out.
pub trait Encoder: Send + Sync {
    fn config(&self) -> &EncoderConfig;
    fn dim(&self) -> usize;
    fn encode(&self, paragraph: &Paragraph) -> Result<Array2<f64>, TaggerError>;
}

pub fn build_encoder(cfg: &EncoderConfig) -> Result<Box<dyn Encoder>, TaggerError> {
    if cfg.max_tokens == 0 {
        return Err(TaggerError::Config("max_tokens must be positive".into()));
    }
    match cfg.encoder_name.as_str() {
        HASH_ENCODER => Ok(Box::new(HashEncoder::new(cfg.clone()))),
        other => Err(TaggerError::UnknownEncoder(other.to_string())),
    }
}

/// Splits a token into pieces of at most [`MAX_PIECE_CHARS`] characters.
/// Pieces after the first carry a `##` prefix.
pub fn subword_pieces(token: &str) -> Vec<String> {
    let chars: Vec<char> = token.chars().collect();
    chars
        .chunks(MAX_PIECE_CHARS)
        .enumerate()
        .map(|(i, c)| {
            let s: String = c.iter().collect();
            if i == 0 {
                s
            } else {
                format!("##{s}")
            }
        })
        .collect()
}

/// Groups tokens into chunks of at most `max_pieces` pieces, cutting at
/// sentence boundaries. A sentence longer than the window is cut at the
/// window size.
pub fn plan_chunks(paragraph: &Paragraph, pieces_per_token: &[usize], max_pieces: usize) -> Vec<Range<usize>> {
    let mut chunks = Vec::new();
    let mut start = 0;
    let mut used = 0;
    for sent in paragraph.sentence_token_ranges() {
        let size: usize = pieces_per_token[sent.clone()].iter().sum();
        if used > 0 && used + size > max_pieces {
            chunks.push(start..sent.start);
            start = sent.start;
            used = 0;
        }
        if size > max_pieces {
            log::warn!("sentence of {size} pieces exceeds the {max_pieces}-piece window; cutting inside it");
            for t in sent.clone() {
                if used > 0 && used + pieces_per_token[t] > max_pieces {
                    chunks.push(start..t);
                    start = t;
                    used = 0;
                }
                used += pieces_per_token[t];
            }
        } else {
            used += size;
        }
    }
    let n = pieces_per_token.len();
    if start < n {
        chunks.push(start..n);
    }
    chunks
}

/// Frozen hashed-subword encoder. Each piece gets a pseudo-random vector
/// seeded by its hash; a token's vector concatenates its first piece's
/// embedding, neighbouring piece embeddings, hashed piece bigrams, a local
/// window mean, and scalar shape, bracket, citation-mark, sentence-position
/// and sinusoidal position features.
pub struct HashEncoder {
    cfg: EncoderConfig,
}

const EMB_BLOCKS: usize = 8;
const SCALARS: usize = 32;
const WINDOW: usize = 8;

impl HashEncoder {
    pub fn new(cfg: EncoderConfig) -> Self {
        HashEncoder { cfg }
    }

    fn embedding<'a>(&self, cache: &'a mut HashMap<String, Vec<f64>>, key: &str) -> &'a [f64] {
        cache.entry(key.to_string()).or_insert_with(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(key.as_bytes()) ^ self.cfg.seed);
            (0..self.cfg.dim).map(|_| rng.random_range(-1.0..1.0)).collect()
        })
    }

    fn token_scalars(&self, paragraph: &Paragraph, tokens: &[&str]) -> Vec<[f64; SCALARS]> {
        let n = tokens.len();
        let mut out = vec![[0.0; SCALARS]; n];
        let in_mark: Vec<Option<usize>> = paragraph
            .tokens
            .iter()
            .map(|t| paragraph.citation_marks.iter().position(|m| m.range().contains(t)))
            .collect();
        let mut depth: i32 = 0;
        for sent in paragraph.sentence_token_ranges() {
            let marks_in_sentence: Vec<usize> = sent.clone().filter(|&t| in_mark[t].is_some()).collect();
            let len = sent.len().max(1) as f64;
            for t in sent.clone() {
                let s = tokens[t];
                let f = &mut out[t];
                let first = s.chars().next().unwrap_or(' ');
                f[0] = f64::from(first.is_uppercase());
                f[1] = f64::from(s.chars().all(|c| c.is_uppercase()) && s.chars().count() > 1);
                f[2] = f64::from(s.chars().all(|c| c.is_ascii_digit()));
                f[3] = f64::from(!first.is_alphanumeric());
                f[4] = f64::from(matches!(first, '(' | '['));
                f[5] = f64::from(matches!(first, ')' | ']'));
                f[6] = f64::from(first == '.');
                f[7] = f64::from(first == ',' || first == ';');
                f[8] = f64::from(s.chars().count() > MAX_PIECE_CHARS);
                if f[4] > 0.0 {
                    depth += 1;
                }
                f[9] = f64::from(depth.min(3)) / 3.0;
                f[10] = f64::from(depth > 0);
                if f[5] > 0.0 {
                    depth = (depth - 1).max(0);
                }
                let m = in_mark[t];
                f[11] = f64::from(m.is_some());
                f[12] = f64::from(m.is_some() && (t == 0 || in_mark[t - 1] != m));
                f[13] = f64::from(m.is_some() && (t + 1 == n || in_mark[t + 1] != m));
                f[14] = f64::from(t > 0 && in_mark[t - 1].is_some());
                f[15] = f64::from(t + 1 < n && in_mark[t + 1].is_some());
                f[16] = f64::from(!marks_in_sentence.is_empty());
                let dist = marks_in_sentence.iter().map(|&k| k.abs_diff(t)).min();
                f[17] = dist.map_or(1.0, |d| (d as f64 / 5.0).tanh());
                f[18] = f64::from(marks_in_sentence.iter().any(|&k| k < t));
                f[19] = f64::from(marks_in_sentence.iter().any(|&k| k > t));
                f[20] = (t - sent.start) as f64 / len;
                f[21] = f64::from(t == sent.start);
                f[22] = f64::from(t + 1 == sent.end);
                for k in 0..4 {
                    let freq = 1.0 / 10f64.powi(k as i32);
                    f[23 + 2 * k] = (t as f64 * freq).sin();
                    f[24 + 2 * k] = (t as f64 * freq).cos();
                }
                f[31] = (marks_in_sentence.len() as f64 / 4.0).min(1.0);
            }
            depth = 0;
        }
        out
    }

    fn encode_chunk(
        &self,
        pieces: &[(usize, String)],
        first_piece: &[usize],
        scalars: &[[f64; SCALARS]],
        tokens: Range<usize>,
        out: &mut Array2<f64>,
    ) {
        let d = self.cfg.dim;
        let mut cache = HashMap::new();
        let lo = first_piece[tokens.start];
        let hi = if tokens.end < first_piece.len() {
            first_piece[tokens.end]
        } else {
            pieces.len()
        };
        let chunk = &pieces[lo..hi];
        let embs: Vec<Vec<f64>> = chunk.iter().map(|(_, p)| self.embedding(&mut cache, p).to_vec()).collect();
        let zero = vec![0.0; d];
        let mean = |range: Range<isize>| -> Vec<f64> {
            let idx: Vec<usize> = range
                .filter(|&j| j >= 0 && (j as usize) < embs.len())
                .map(|j| j as usize)
                .collect();
            let mut m = vec![0.0; d];
            for &j in &idx {
                for (a, b) in m.iter_mut().zip(&embs[j]) {
                    *a += b;
                }
            }
            if !idx.is_empty() {
                m.iter_mut().for_each(|a| *a /= idx.len() as f64);
            }
            m
        };
        for t in tokens {
            let j = first_piece[t] - lo;
            let ji = j as isize;
            let prev = if j > 0 { &embs[j - 1] } else { &zero };
            let next = embs.get(j + 1).unwrap_or(&zero);
            let left_bigram = format!("{}|{}", if j > 0 { &chunk[j - 1].1 } else { "<s>" }, chunk[j].1);
            let right_bigram = format!("{}|{}", chunk[j].1, chunk.get(j + 1).map_or("</s>", |p| &p.1));
            let blocks: [Vec<f64>; EMB_BLOCKS] = [
                embs[j].clone(),
                prev.clone(),
                next.clone(),
                mean(ji - 3..ji - 1),
                mean(ji + 2..ji + 4),
                mean(ji - WINDOW as isize..ji + WINDOW as isize + 1),
                self.embedding(&mut cache, &left_bigram).to_vec(),
                self.embedding(&mut cache, &right_bigram).to_vec(),
            ];
            let mut row = out.row_mut(t);
            for (b, block) in blocks.iter().enumerate() {
                for (k, v) in block.iter().enumerate() {
                    row[b * d + k] = *v;
                }
            }
            for (k, v) in scalars[t].iter().enumerate() {
                row[EMB_BLOCKS * d + k] = *v;
            }
        }
    }
}

impl Encoder for HashEncoder {
    fn config(&self) -> &EncoderConfig {
        &self.cfg
    }

    fn dim(&self) -> usize {
        EMB_BLOCKS * self.cfg.dim + SCALARS
    }

    fn encode(&self, paragraph: &Paragraph) -> Result<Array2<f64>, TaggerError> {
        let n = paragraph.tokens.len();
        if n == 0 {
            return Err(TaggerError::EmptyParagraph);
        }
        let idx = CharIndex::new(&paragraph.text);
        let tokens: Vec<&str> = paragraph.tokens.iter().map(|t| idx.slice(*t)).collect();
        let mut pieces = Vec::new();
        let mut first_piece = Vec::with_capacity(n);
        let mut counts = Vec::with_capacity(n);
        for (t, tok) in tokens.iter().enumerate() {
            first_piece.push(pieces.len());
            let ps = subword_pieces(&tok.to_lowercase());
            counts.push(ps.len());
            pieces.extend(ps.into_iter().map(|p| (t, p)));
        }
        let scalars = self.token_scalars(paragraph, &tokens);
        let mut out = Array2::zeros((n, self.dim()));
        let chunks = if self.cfg.chunking == ChunkPolicy::Always || pieces.len() > self.cfg.max_tokens {
            plan_chunks(paragraph, &counts, self.cfg.max_tokens)
        } else {
            std::iter::once(0..n).collect()
        };
        for chunk in chunks {
            self.encode_chunk(&pieces, &first_piece, &scalars, chunk, &mut out);
        }
        Ok(out)
    }
}
