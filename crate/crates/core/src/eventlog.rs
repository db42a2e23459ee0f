//! Event logs and their stochastic language.
//!
//! Two input formats:
//!
//! * CSV with a header containing `case` and `activity` columns, one event
//!   per row. Events of a case keep file row order; other columns (timestamps
//!   included) are ignored.
//! * JSON lines, each `{"trace": ["a", "b"], "count": 15}` (`count` defaults to 1).
//!
//! The language dump format is a JSON array of `{"trace": [...], "p": real}`
//! in convex-index order.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::word::{word_map_codes, LetterMap, WordMappingValue};

#[derive(Debug, Error)]
pub enum LogError {
    #[error("event log is empty")]
    Empty,
    #[error("line {line}: empty trace")]
    EmptyTrace { line: usize },
    #[error("CSV header lacks a `{0}` column")]
    MissingColumn(&'static str),
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed language dump: {0}")]
    Dump(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Csv,
    JsonLines,
}

impl LogFormat {
    /// JSON lines when the first non-blank character is `{`, CSV otherwise.
    pub fn sniff(text: &str) -> Self {
        match text.trim_start().chars().next() {
            Some('{') => LogFormat::JsonLines,
            _ => LogFormat::Csv,
        }
    }
}

/// The stochastic language of a log together with the constants the
/// detector needs.
///
/// Unique traces are stored in convex-index order: sorted by word-mapping
/// value, index `i` is the trace's bucket in every distribution over the
/// log's support.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLanguage {
    alphabet: Vec<String>,
    letters: LetterMap,
    /// Letter codes are 1-based positions in `alphabet`.
    traces: Vec<Vec<u32>>,
    frequencies: Vec<u64>,
    probabilities: Vec<f64>,
    letter_maxima: Vec<u32>,
    max_len: usize,
    word_values: Vec<WordMappingValue>,
    remap: HashMap<WordMappingValue, usize>,
    remap_small: HashMap<u128, usize>,
    by_trace: HashMap<Vec<u32>, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LogStats {
    /// Alphabet size.
    pub n: usize,
    /// Per-activity maximum occurrences in any trace, alphabet order.
    pub letter_maxima: Vec<(String, u32)>,
    /// Longest trace length.
    pub max_len: usize,
    pub support_size: usize,
    pub total_traces: u64,
}

impl LogLanguage {
    /// Builds the language from traces with multiplicities. Identical traces merge.
    pub fn from_traces<I, T, S>(traces: I) -> Result<Self, LogError>
    where
        I: IntoIterator<Item = (T, u64)>,
        T: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut merged: HashMap<Vec<String>, u64> = HashMap::new();
        let mut order: Vec<Vec<String>> = Vec::new();
        for (i, (trace, count)) in traces.into_iter().enumerate() {
            let trace: Vec<String> = trace.into_iter().map(Into::into).collect();
            if trace.is_empty() {
                return Err(LogError::EmptyTrace { line: i + 1 });
            }
            if count == 0 {
                continue;
            }
            let e = merged.entry(trace.clone()).or_insert_with(|| {
                order.push(trace);
                0
            });
            *e += count;
        }
        if merged.is_empty() {
            return Err(LogError::Empty);
        }

        let mut alphabet: Vec<String> = order.iter().flatten().cloned().collect();
        alphabet.sort_unstable();
        alphabet.dedup();
        let letters = LetterMap::sorted(&alphabet);
        let n = letters.n();

        let mut coded: Vec<(WordMappingValue, Vec<u32>, u64)> = order
            .iter()
            .map(|t| {
                let codes: Vec<u32> = t.iter().map(|a| letters.code(a).unwrap()).collect();
                (word_map_codes(&codes, n), codes, merged[t])
            })
            .collect();
        coded.sort_by(|a, b| a.0.cmp(&b.0));

        let total: u64 = coded.iter().map(|c| c.2).sum();
        let mut letter_maxima = vec![0u32; alphabet.len()];
        let mut max_len = 0;
        for (_, codes, _) in &coded {
            max_len = max_len.max(codes.len());
            let mut counts = vec![0u32; alphabet.len()];
            for &c in codes {
                counts[c as usize - 1] += 1;
            }
            for (m, c) in letter_maxima.iter_mut().zip(counts) {
                *m = (*m).max(c);
            }
        }

        let mut remap = HashMap::new();
        let mut remap_small = HashMap::new();
        let mut by_trace = HashMap::new();
        for (i, (w, codes, _)) in coded.iter().enumerate() {
            remap.insert(w.clone(), i);
            if let Some(s) = w.to_u128() {
                remap_small.insert(s, i);
            }
            by_trace.insert(codes.clone(), i);
        }

        Ok(Self {
            letters,
            traces: coded.iter().map(|c| c.1.clone()).collect(),
            frequencies: coded.iter().map(|c| c.2).collect(),
            probabilities: coded.iter().map(|c| c.2 as f64 / total as f64).collect(),
            word_values: coded.into_iter().map(|c| c.0).collect(),
            alphabet,
            letter_maxima,
            max_len,
            remap,
            remap_small,
            by_trace,
        })
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn letter_map(&self) -> &LetterMap {
        &self.letters
    }

    /// 1-based code of an activity (its position in the sorted alphabet).
    pub fn letter_code(&self, activity: &str) -> Option<u32> {
        self.letters.code(activity)
    }

    pub fn support_size(&self) -> usize {
        self.traces.len()
    }

    /// Unique trace at convex index `i`, as letter codes.
    pub fn coded_trace(&self, i: usize) -> &[u32] {
        &self.traces[i]
    }

    pub fn trace(&self, i: usize) -> Vec<String> {
        self.traces[i]
            .iter()
            .map(|&c| self.alphabet[c as usize - 1].clone())
            .collect()
    }

    pub fn traces(&self) -> Vec<Vec<String>> {
        (0..self.traces.len()).map(|i| self.trace(i)).collect()
    }

    pub fn frequency(&self, i: usize) -> u64 {
        self.frequencies[i]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Maximum count of each letter in one trace, indexed by code - 1.
    pub fn letter_maxima(&self) -> &[u32] {
        &self.letter_maxima
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn word_value(&self, i: usize) -> &WordMappingValue {
        &self.word_values[i]
    }

    /// Convex index of a word-mapping value, `None` outside the log.
    pub fn convex_index(&self, value: &WordMappingValue) -> Option<usize> {
        self.remap.get(value).copied()
    }

    pub(crate) fn convex_index_small(&self, value: u128) -> Option<usize> {
        self.remap_small.get(&value).copied()
    }

    /// Convex index of a trace given as letter codes.
    pub fn index_of_coded(&self, codes: &[u32]) -> Option<usize> {
        self.by_trace.get(codes).copied()
    }

    pub fn index_of<S: AsRef<str>>(&self, trace: &[S]) -> Option<usize> {
        let codes = trace
            .iter()
            .map(|a| self.letter_code(a.as_ref()))
            .collect::<Option<Vec<_>>>()?;
        self.index_of_coded(&codes)
    }

    pub fn stats(&self) -> LogStats {
        LogStats {
            n: self.alphabet.len(),
            letter_maxima: self
                .alphabet
                .iter()
                .cloned()
                .zip(self.letter_maxima.iter().copied())
                .collect(),
            max_len: self.max_len,
            support_size: self.traces.len(),
            total_traces: self.frequencies.iter().sum(),
        }
    }

    /// The log's own distribution in dump form.
    pub fn to_dump(&self) -> Vec<DumpEntry> {
        self.dump_with(&self.probabilities)
    }

    /// Pairs `probs` (indexed by convex index) with the log's traces.
    pub fn dump_with(&self, probs: &[f64]) -> Vec<DumpEntry> {
        (0..self.traces.len())
            .map(|i| DumpEntry {
                trace: self.trace(i),
                p: probs[i],
            })
            .collect()
    }
}

pub fn parse_log(text: &str, format: LogFormat) -> Result<LogLanguage, LogError> {
    match format {
        LogFormat::Csv => parse_csv(text),
        LogFormat::JsonLines => parse_jsonl(text),
    }
}

pub fn parse_csv(text: &str) -> Result<LogLanguage, LogError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or(LogError::MissingColumn(name))
    };
    let case_col = col("case")?;
    let act_col = col("activity")?;

    let mut cases: HashMap<String, usize> = HashMap::new();
    let mut traces: Vec<Vec<String>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record?;
        let (Some(case), Some(activity)) = (record.get(case_col), record.get(act_col)) else {
            return Err(LogError::Row {
                line,
                message: "missing case or activity field".into(),
            });
        };
        if activity.is_empty() {
            return Err(LogError::Row {
                line,
                message: "empty activity".into(),
            });
        }
        let idx = *cases.entry(case.to_owned()).or_insert_with(|| {
            traces.push(Vec::new());
            traces.len() - 1
        });
        traces[idx].push(activity.to_owned());
    }
    LogLanguage::from_traces(traces.into_iter().map(|t| (t, 1)))
}

#[derive(Debug, Deserialize)]
struct JsonTrace {
    trace: Vec<String>,
    #[serde(default = "one")]
    count: u64,
}

fn one() -> u64 {
    1
}

pub fn parse_jsonl(text: &str) -> Result<LogLanguage, LogError> {
    let mut traces = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let t: JsonTrace = serde_json::from_str(line).map_err(|e| LogError::Row {
            line: i + 1,
            message: e.to_string(),
        })?;
        if t.trace.is_empty() {
            return Err(LogError::EmptyTrace { line: i + 1 });
        }
        if t.count == 0 {
            return Err(LogError::Row {
                line: i + 1,
                message: "count must be positive".into(),
            });
        }
        traces.push((t.trace, t.count));
    }
    LogLanguage::from_traces(traces)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpEntry {
    pub trace: Vec<String>,
    pub p: f64,
}

/// Reads a language dump: either a bare array of entries or an object whose
/// `language` field holds one (as written for estimates).
pub fn parse_language_dump(text: &str) -> Result<Vec<DumpEntry>, LogError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Doc {
        Bare(Vec<DumpEntry>),
        Wrapped { language: Vec<DumpEntry> },
    }
    Ok(match serde_json::from_str(text)? {
        Doc::Bare(v) => v,
        Doc::Wrapped { language } => language,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn example_log() -> LogLanguage {
        LogLanguage::from_traces([
            (vec!["a", "b", "c"], 15),
            (vec!["a", "c", "b"], 35),
            (vec!["a", "b", "d"], 15),
            (vec!["a", "d", "b"], 35),
        ])
        .unwrap()
    }

    fn prob_of(lang: &LogLanguage, t: &[&str]) -> f64 {
        lang.probabilities()[lang.index_of(t).unwrap()]
    }

    #[test]
    fn example_log_language() {
        let lang = example_log();
        assert!((prob_of(&lang, &["a", "b", "c"]) - 0.15).abs() < 1e-12);
        assert!((prob_of(&lang, &["a", "c", "b"]) - 0.35).abs() < 1e-12);
        assert!((prob_of(&lang, &["a", "b", "d"]) - 0.15).abs() < 1e-12);
        assert!((prob_of(&lang, &["a", "d", "b"]) - 0.35).abs() < 1e-12);
        let s = lang.stats();
        assert_eq!((s.n, s.max_len, s.support_size), (4, 3, 4));
        assert!(lang.letter_maxima().iter().all(|&l| l == 1));
        assert_eq!(lang.letter_code("a"), Some(1));
        assert_eq!(lang.letter_code("d"), Some(4));
    }

    #[test]
    fn convex_order_follows_word_value() {
        let lang = example_log();
        for i in 1..lang.support_size() {
            assert!(lang.word_value(i - 1) < lang.word_value(i));
        }
        for i in 0..lang.support_size() {
            assert_eq!(lang.convex_index(lang.word_value(i)), Some(i));
        }
    }

    #[test]
    fn single_repeated_trace() {
        let lang = parse_jsonl(r#"{"trace": ["a","a","a"], "count": 7}"#).unwrap();
        assert_eq!(lang.support_size(), 1);
        assert_eq!(lang.probabilities(), &[1.0]);
        let s = lang.stats();
        assert_eq!((s.n, s.max_len), (1, 3));
        assert_eq!(s.letter_maxima, vec![("a".to_string(), 3)]);
    }

    #[test]
    fn csv_groups_by_case_in_row_order() {
        let csv = "case,activity,timestamp\n1,a,t\n2,a,t\n1,b,t\n\"2\",\"c\",t\n1,c,t\n2,b,t\n";
        let lang = parse_csv(csv).unwrap();
        assert_eq!(lang.support_size(), 2);
        assert!(lang.index_of(&["a", "b", "c"]).is_some());
        assert!(lang.index_of(&["a", "c", "b"]).is_some());
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_csv("case,activity\n"), Err(LogError::Empty)));
        assert!(matches!(parse_jsonl(""), Err(LogError::Empty)));
        assert!(matches!(
            parse_csv("id,act\n1,a\n"),
            Err(LogError::MissingColumn("case"))
        ));
        assert!(matches!(
            parse_jsonl(r#"{"trace": []}"#),
            Err(LogError::EmptyTrace { line: 1 })
        ));
        assert!(matches!(
            parse_jsonl("{\"trace\": [\"a\"]}\nnot json"),
            Err(LogError::Row { line: 2, .. })
        ));
        assert!(matches!(
            parse_csv("case,activity\n1,\n"),
            Err(LogError::Row { line: 2, .. })
        ));
    }

    #[test]
    fn format_sniffing() {
        assert_eq!(LogFormat::sniff("  {\"trace\":[]}"), LogFormat::JsonLines);
        assert_eq!(LogFormat::sniff("case,activity"), LogFormat::Csv);
    }

    #[test]
    fn dump_round_trip() {
        let lang = example_log();
        let text = serde_json::to_string(&lang.to_dump()).unwrap();
        assert_eq!(parse_language_dump(&text).unwrap(), lang.to_dump());
        let wrapped = format!("{{\"language\": {text}, \"meta\": {{}}}}");
        assert_eq!(parse_language_dump(&wrapped).unwrap(), lang.to_dump());
    }
}
