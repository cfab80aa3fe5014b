//! Plain-text arc listing used for fixtures and goldens.
//!
//! One arc per line, `src dst in_label out_label score emit_attr`, followed by
//! a line holding the final state. Scores use 9 significant digits.

use std::fmt::Write as _;

use super::{Arc, Fsa};
use crate::error::{Error, Result};

/// `printf("%.9g")`-style formatting.
pub fn format_score(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.8e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), sign, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

impl Fsa {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if self.is_empty() {
            return out;
        }
        for a in self.arcs() {
            writeln!(
                out,
                "{} {} {} {} {} {}",
                a.src,
                a.dst,
                a.in_label,
                a.out_label,
                format_score(a.score),
                u8::from(a.emit_attr)
            )
            .expect("write to String");
        }
        writeln!(out, "{}", self.final_state()).expect("write to String");
        out
    }

    pub fn from_text(text: &str) -> Result<Fsa> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        let Some((&(final_line, final_text), arc_lines)) = lines.split_last() else {
            return Ok(Fsa::empty());
        };
        let final_state: usize = final_text.parse().map_err(|_| Error::Parse {
            line: final_line,
            msg: format!("expected final state, got {final_text:?}"),
        })?;
        let mut arcs = Vec::with_capacity(arc_lines.len());
        let mut num_states = final_state + 1;
        for &(line, text) in arc_lines {
            let fields: Vec<&str> = text.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected 6 fields, got {}", fields.len()),
                });
            }
            let bad = |what: &str| Error::Parse {
                line,
                msg: format!("bad {what}"),
            };
            let src: usize = fields[0].parse().map_err(|_| bad("source state"))?;
            let dst: usize = fields[1].parse().map_err(|_| bad("destination state"))?;
            let in_label: i32 = fields[2].parse().map_err(|_| bad("input label"))?;
            let out_label: i32 = fields[3].parse().map_err(|_| bad("output label"))?;
            let score: f64 = fields[4].parse().map_err(|_| bad("score"))?;
            let emit = match fields[5] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("emit attribute")),
            };
            num_states = num_states.max(src + 1).max(dst + 1);
            arcs.push(Arc::new(src, dst, in_label, out_label, score).with_emit(emit));
        }
        Fsa::with_final(num_states, final_state, arcs)
    }
}
