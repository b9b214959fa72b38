//! Numbers with SPICE engineering suffixes.

/// Parses `1k`, `2.2u`, `10meg`, `3.3`, `1e-3`, `5mA` (trailing unit letters
/// after a suffix are ignored, as in SPICE).
pub fn parse_value(text: &str) -> Option<f64> {
    let s = text.trim().to_ascii_lowercase();
    if s.is_empty() {
        return None;
    }
    let bytes = s.as_bytes();
    // Longest prefix that is a plain float (digits, sign, point, exponent).
    let mut end = 0;
    let mut seen_digit = false;
    let mut seen_exp = false;
    let mut seen_point = false;
    while end < bytes.len() {
        let c = bytes[end] as char;
        match c {
            '0'..='9' => seen_digit = true,
            '+' | '-' if end == 0 || matches!(bytes[end - 1], b'e') => {}
            '.' if !seen_point && !seen_exp => seen_point = true,
            'e' if seen_digit && !seen_exp => {
                // Only an exponent if followed by a digit or sign+digit.
                let next = bytes.get(end + 1).copied();
                let next2 = bytes.get(end + 2).copied();
                let is_exp = matches!(next, Some(b'0'..=b'9'))
                    || (matches!(next, Some(b'+') | Some(b'-')) && matches!(next2, Some(b'0'..=b'9')));
                if !is_exp {
                    break;
                }
                seen_exp = true;
            }
            _ => break,
        }
        end += 1;
    }
    if !seen_digit {
        return None;
    }
    let base: f64 = s[..end].parse().ok()?;
    let rest = &s[end..];
    let mult = if rest.starts_with("meg") {
        1e6
    } else if rest.starts_with("mil") {
        25.4e-6
    } else {
        match rest.chars().next() {
            None => 1.0,
            Some('t') => 1e12,
            Some('g') => 1e9,
            Some('k') => 1e3,
            Some('m') => 1e-3,
            Some('u') | Some('µ') => 1e-6,
            Some('n') => 1e-9,
            Some('p') => 1e-12,
            Some('f') => 1e-15,
            Some(c) if c.is_ascii_alphabetic() => 1.0,
            Some(_) => return None,
        }
    };
    if !rest.chars().all(|c| c.is_alphabetic()) {
        return None;
    }
    Some(base * mult)
}

#[cfg(test)]
mod tests {
    use super::parse_value;

    #[test]
    fn suffixes() {
        let cases = [
            ("1k", 1e3),
            ("1K", 1e3),
            ("2.2u", 2.2e-6),
            ("10meg", 10e6),
            ("10MEG", 10e6),
            ("3m", 3e-3),
            ("4n", 4e-9),
            ("5p", 5e-12),
            ("7f", 7e-15),
            ("1g", 1e9),
            ("1e-3", 1e-3),
            ("1.5e+2", 150.0),
            ("-0.5", -0.5),
            ("100", 100.0),
            ("5mA", 5e-3),
            ("10V", 10.0),
            ("1kohm", 1e3),
            (".5", 0.5),
        ];
        for (text, want) in cases {
            let got = parse_value(text).unwrap_or_else(|| panic!("{text}"));
            assert!((got - want).abs() <= 1e-12 * want.abs(), "{text}: {got}");
        }
    }

    #[test]
    fn rejects_garbage() {
        for t in ["", "abc", "k1", "1k2", "--1", "1.2.3"] {
            assert!(parse_value(t).is_none(), "{t}");
        }
    }
}
