//! Sparse kernel classifiers and their text format.
//!
//! ```text
//! SVMODEL v1
//! kernel gaussian 0.5          # or: kernel linear | kernel gaussian_gamma <g>
//! bias none                    # or: bias <b>
//! support 2
//! 3 0.25 +1 1:0.5 4:1
//! 9 0.125 -1 2:-1
//! ```
//! Each support line is `<training index> <alpha> <label> <idx>:<val>...` with
//! 1-based feature indices, as in LIBSVM.

use std::fmt::Write as _;

use crate::data::{Dataset, Label, SparseVector};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

pub const MODEL_HEADER: &str = "SVMODEL";
pub const MODEL_VERSION: &str = "v1";

/// Anything that scores points; `sign(decision(x))` is the prediction.
pub trait Classifier {
    fn decision(&self, x: &SparseVector) -> f64;

    /// Fraction of examples with `y * g(x) <= 0`.
    fn error_rate(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let wrong = (0..data.len())
            .filter(|&i| data.y(i) * self.decision(data.x(i)) <= 0.0)
            .count();
        wrong as f64 / data.len() as f64
    }
}

/// Callback measuring held-out error of an intermediate classifier.
pub type ErrorProbe<'f> = &'f mut dyn FnMut(&dyn Classifier) -> f64;

#[derive(Clone, Debug, PartialEq)]
pub struct SupportVector {
    /// Position in the training set.
    pub index: usize,
    pub alpha: f64,
    pub label: Label,
    pub x: SparseVector,
}

/// `x -> sum_i alpha_i y_i K(x_i, x) + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseClassifier {
    pub kernel: KernelSpec,
    pub support: Vec<SupportVector>,
    pub bias: Option<f64>,
}

impl SparseClassifier {
    /// Keeps the examples with nonzero coefficient.
    pub fn from_coefficients(data: &Dataset, alpha: &[f64], kernel: KernelSpec, bias: Option<f64>) -> Self {
        let support = alpha
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0.0)
            .map(|(i, &a)| SupportVector {
                index: i,
                alpha: a,
                label: data.labels()[i],
                x: data.x(i).clone(),
            })
            .collect();
        Self {
            kernel,
            support,
            bias,
        }
    }

    pub fn support_size(&self) -> usize {
        self.support.len()
    }

    /// Predicted label; a zero score counts as an error in
    /// [`Classifier::error_rate`].
    pub fn predict(&self, x: &SparseVector) -> Label {
        Label::from_sign(self.decision(x))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MODEL_HEADER} {MODEL_VERSION}\n");
        match self.kernel {
            KernelSpec::Linear => out.push_str("kernel linear\n"),
            KernelSpec::Gaussian { sigma_sq } => {
                let _ = writeln!(out, "kernel gaussian {sigma_sq}");
            }
            KernelSpec::GaussianGamma { gamma } => {
                let _ = writeln!(out, "kernel gaussian_gamma {gamma}");
            }
        }
        match self.bias {
            None => out.push_str("bias none\n"),
            Some(b) => {
                let _ = writeln!(out, "bias {b}");
            }
        }
        let _ = writeln!(out, "support {}", self.support.len());
        for sv in &self.support {
            let label = if sv.label == Label::Pos { "+1" } else { "-1" };
            let _ = write!(out, "{} {} {}", sv.index, sv.alpha, label);
            for (i, v) in sv.x.iter() {
                let _ = write!(out, " {}:{}", i + 1, v);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);

        let (off, header) = lines.next_line("header")?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(MODEL_HEADER) {
            return Err(Error::Format {
                offset: off,
                msg: format!("expected {MODEL_HEADER} header"),
            });
        }
        let version = parts.next().unwrap_or("");
        if version != MODEL_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version.to_string(),
                expected: MODEL_VERSION.to_string(),
            });
        }

        let (off, line) = lines.next_line("kernel line")?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let kernel = match toks.as_slice() {
            ["kernel", "linear"] => KernelSpec::Linear,
            ["kernel", "gaussian", s] => KernelSpec::Gaussian {
                sigma_sq: num(s, off)?,
            },
            ["kernel", "gaussian_gamma", g] => KernelSpec::GaussianGamma { gamma: num(g, off)? },
            _ => {
                return Err(Error::Format {
                    offset: off,
                    msg: format!("bad kernel line {line:?}"),
                })
            }
        };

        let (off, line) = lines.next_line("bias line")?;
        let bias = match line.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["bias", "none"] => None,
            ["bias", b] => Some(num(b, off)?),
            _ => {
                return Err(Error::Format {
                    offset: off,
                    msg: format!("bad bias line {line:?}"),
                })
            }
        };

        let (off, line) = lines.next_line("support count")?;
        let count: usize = match line.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["support", m] => m.parse().map_err(|_| Error::Format {
                offset: off,
                msg: format!("bad support count {m:?}"),
            })?,
            _ => {
                return Err(Error::Format {
                    offset: off,
                    msg: format!("bad support line {line:?}"),
                })
            }
        };

        let mut support = Vec::with_capacity(count);
        for _ in 0..count {
            let (off, line) = lines.next_line("support vector")?;
            support.push(parse_support_line(line, off)?);
        }
        if let Ok((off, extra)) = lines.next_line("") {
            return Err(Error::Format {
                offset: off,
                msg: format!("unexpected trailing content {extra:?}"),
            });
        }
        Ok(Self {
            kernel,
            support,
            bias,
        })
    }
}

impl Classifier for SparseClassifier {
    fn decision(&self, x: &SparseVector) -> f64 {
        let x_sq = x.norm_sq();
        let score: f64 = self
            .support
            .iter()
            .map(|sv| sv.alpha * sv.label.sign() * self.kernel.eval_with_norms(&sv.x, x, sv.x.norm_sq(), x_sq))
            .sum();
        score + self.bias.unwrap_or(0.0)
    }
}

fn num(tok: &str, offset: usize) -> Result<f64> {
    tok.parse().map_err(|_| Error::Format {
        offset,
        msg: format!("bad number {tok:?}"),
    })
}

fn parse_support_line(line: &str, off: usize) -> Result<SupportVector> {
    let bad = |msg: String| Error::Format { offset: off, msg };
    let mut toks = line.split_whitespace();
    let index = toks
        .next()
        .and_then(|t| t.parse::<usize>().ok())
        .ok_or_else(|| bad("missing support index".into()))?;
    let alpha = num(toks.next().ok_or_else(|| bad("missing alpha".into()))?, off)?;
    let label = match toks.next() {
        Some("+1") | Some("1") => Label::Pos,
        Some("-1") => Label::Neg,
        other => return Err(bad(format!("bad label {other:?}"))),
    };
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for tok in toks {
        let (i, v) = tok
            .split_once(':')
            .ok_or_else(|| bad(format!("bad feature {tok:?}")))?;
        let i: u32 = i.parse().map_err(|_| bad(format!("bad feature index {i:?}")))?;
        if i == 0 {
            return Err(bad("feature indices are 1-based".into()));
        }
        indices.push(i - 1);
        values.push(num(v, off)?);
    }
    let x = SparseVector::new(indices, values).map_err(|e| bad(e.to_string()))?;
    Ok(SupportVector {
        index,
        alpha,
        label,
        x,
    })
}

/// Line iterator that remembers byte offsets and skips blank lines.
pub(crate) struct Lines<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Self { text, pos: 0 }
    }

    pub(crate) fn next_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        while self.pos < self.text.len() {
            let start = self.pos;
            let rest = &self.text[start..];
            let (line, adv) = match rest.find('\n') {
                Some(k) => (&rest[..k], k + 1),
                None => (rest, rest.len()),
            };
            self.pos += adv;
            if !line.trim().is_empty() {
                return Ok((start, line.trim_end_matches('\r')));
            }
        }
        Err(Error::Format {
            offset: self.text.len(),
            msg: format!("unexpected end of input, expected {what}"),
        })
    }
}
