use crate::prob::{Distribution, TypeDistribution};
use std::io::{self, Write};

pub const TRACE_HEADER: &str = "generation,index,code_bits,rate_bits_per_symbol,distortion,matched,q_n,kl_to_target";

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    /// 1-based.
    pub generation: u64,
    pub index: u64,
    pub code_bits: u32,
    /// `code_bits / L`.
    pub rate: f64,
    pub distortion: f64,
    pub matched: bool,
    /// Codebook distribution after this generation's update.
    pub q: Distribution,
    /// `KL(Q* || Q_n)` against the supplied reference.
    pub kl_to_target: Option<f64>,
    pub codeword_type: TypeDistribution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    pub initial: Distribution,
    pub records: Vec<GenerationRecord>,
}

impl SessionTrace {
    pub fn final_q(&self) -> &Distribution {
        self.records.last().map(|r| &r.q).unwrap_or(&self.initial)
    }

    pub fn total_bits(&self) -> u64 {
        self.records.iter().map(|r| r.code_bits as u64).sum()
    }

    pub fn fallback_count(&self) -> usize {
        self.records.iter().filter(|r| !r.matched).count()
    }

    /// One header line plus one row per generation, LF-terminated.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for r in &self.records {
            let q: Vec<String> = r.q.probs().iter().map(|&p| format_sig(p, 12)).collect();
            let kl = r.kl_to_target.map(format_float).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.generation,
                r.index,
                r.code_bits,
                format_float(r.rate),
                format_float(r.distortion),
                r.matched,
                q.join(";"),
                kl
            )?;
        }
        Ok(())
    }
}

/// Shortest round-trip decimal; `inf`, `-inf`, `nan` for non-finite values.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

/// Plain decimal with `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format_float(x);
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding may carry into a new leading digit (9.99.. -> 10.0).
    let sig = s.chars().filter(char::is_ascii_digit).skip_while(|&c| c == '0').count();
    if sig > digits && decimals > 0 {
        let decimals = decimals - 1;
        return format!("{x:.decimals$}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(0.5, 12), "0.500000000000");
        assert_eq!(format_sig(1.0, 12), "1.00000000000");
        assert_eq!(format_sig(0.3, 12), "0.300000000000");
        assert_eq!(format_sig(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(format_sig(0.0, 12), "0");
        assert_eq!(format_sig(0.0123456789012345, 12), "0.0123456789012");
        assert_eq!(format_sig(0.99999999999999, 12), "1.00000000000");
        assert_eq!(format_sig(f64::INFINITY, 12), "inf");
    }

    #[test]
    fn empty_trace_has_header_only() {
        let t = SessionTrace { initial: Distribution::uniform(2), records: vec![] };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{TRACE_HEADER}\n"));
        assert_eq!(t.final_q(), &Distribution::uniform(2));
    }
}
