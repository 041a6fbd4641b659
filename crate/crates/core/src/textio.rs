//! Line-oriented text format shared by instances and design points.
//!
//! Complex entries are written as `re,im` tokens separated by spaces, one
//! matrix row per line, using shortest round-trip float formatting.

use std::fmt::Write as _;

use crate::channel::{CMat, C64};
use crate::error::{Error, Result};

pub(crate) fn write_rows(out: &mut String, m: &CMat) {
    for i in 0..m.rows {
        let row = m.row(i);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{},{}", v.re, v.im);
        }
        out.push('\n');
    }
}

pub(crate) fn parse_complex(tok: &str, line: usize) -> Result<C64> {
    let bad = || Error::Parse {
        line,
        msg: format!("bad complex entry {tok:?}"),
    };
    let (re, im) = tok.split_once(',').ok_or_else(bad)?;
    let re: f64 = re.parse().map_err(|_| bad())?;
    let im: f64 = im.parse().map_err(|_| bad())?;
    Ok(C64::new(re, im))
}

/// Cursor over the significant lines of a document, with 1-based line
/// numbers kept for error messages.
pub(crate) struct Reader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(text: &'a str, header: &str) -> Result<Self> {
        let mut it = text.lines();
        match it.next() {
            Some(h) if h.trim() == header => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected header {header:?}"),
                })
            }
        }
        let lines = text
            .lines()
            .enumerate()
            .skip(1)
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Ok(Self { lines, pos: 0 })
    }

    fn next_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let last = self.lines.last().map_or(1, |l| l.0);
        let l = self.lines.get(self.pos).copied().ok_or_else(|| Error::Parse {
            line: last,
            msg: format!("unexpected end of input, expected {what}"),
        })?;
        self.pos += 1;
        Ok(l)
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (ln, line) = self.next_line(key)?;
        let mut toks = line.split_whitespace();
        if toks.next() != Some(key) {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected {key:?}"),
            });
        }
        Ok((ln, toks.collect()))
    }

    fn count_check(ln: usize, key: &str, got: usize, want: usize) -> Result<()> {
        if got != want {
            return Err(Error::Parse {
                line: ln,
                msg: format!("{key} expects {want} values, found {got}"),
            });
        }
        Ok(())
    }

    pub fn keyed_usizes(&mut self, key: &str, n: usize) -> Result<Vec<usize>> {
        let (ln, toks) = self.keyed(key)?;
        Self::count_check(ln, key, toks.len(), n)?;
        toks.iter()
            .map(|t| {
                t.parse().map_err(|_| Error::Parse {
                    line: ln,
                    msg: format!("bad integer {t:?}"),
                })
            })
            .collect()
    }

    pub fn keyed_f64s(&mut self, key: &str, n: usize) -> Result<Vec<f64>> {
        let (ln, toks) = self.keyed(key)?;
        Self::count_check(ln, key, toks.len(), n)?;
        toks.iter()
            .map(|t| {
                t.parse().map_err(|_| Error::Parse {
                    line: ln,
                    msg: format!("bad number {t:?}"),
                })
            })
            .collect()
    }

    pub fn keyed_bool(&mut self, key: &str) -> Result<bool> {
        let (ln, toks) = self.keyed(key)?;
        Self::count_check(ln, key, toks.len(), 1)?;
        match toks[0] {
            "true" => Ok(true),
            "false" => Ok(false),
            t => Err(Error::Parse {
                line: ln,
                msg: format!("expected true or false, found {t:?}"),
            }),
        }
    }

    pub fn expect_word(&mut self, word: &str) -> Result<()> {
        let (ln, line) = self.next_line(word)?;
        if line != word {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected section {word:?}, found {line:?}"),
            });
        }
        Ok(())
    }

    pub fn matrix(&mut self, rows: usize, cols: usize) -> Result<CMat> {
        let mut m = CMat::zeros(rows, cols);
        for i in 0..rows {
            let (ln, line) = self.next_line("matrix row")?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            Self::count_check(ln, "row", toks.len(), cols)?;
            for (j, t) in toks.iter().enumerate() {
                m.set(i, j, parse_complex(t, ln)?);
            }
        }
        Ok(m)
    }

    pub fn finish(&self) -> Result<()> {
        if let Some((ln, l)) = self.lines.get(self.pos) {
            return Err(Error::Parse {
                line: *ln,
                msg: format!("trailing content {l:?}"),
            });
        }
        Ok(())
    }
}
