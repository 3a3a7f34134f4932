/// Parses `lo:hi:n` (inclusive endpoints), a comma-separated list, or a
/// single number.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("not a finite number: '{s}'"))
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [lo, hi, n] => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| format!("grid size must be a positive integer: '{n}'"))?;
            match n {
                0 => Err("grid size must be at least 1".into()),
                1 if lo == hi => Ok(vec![lo]),
                1 => Err("a one-point grid needs lo == hi".into()),
                _ => Ok((0..n)
                    .map(|i| {
                        if i == n - 1 {
                            hi
                        } else {
                            lo + (hi - lo) * i as f64 / (n - 1) as f64
                        }
                    })
                    .collect()),
            }
        }
        [single] => single.split(',').map(num).collect(),
        _ => Err(format!(
            "expected lo:hi:n or a comma-separated list, got '{text}'"
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inclusive_grid() {
        let g = parse_grid("-0.1:0.1:21").unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], -0.1);
        assert_eq!(g[20], 0.1);
        assert!(g[10].abs() < 1e-17);
    }

    #[test]
    fn lists_and_errors() {
        assert_eq!(parse_grid("0.1").unwrap(), [0.1]);
        assert_eq!(parse_grid("0.09, 0.1,0.11").unwrap(), [0.09, 0.1, 0.11]);
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("a").is_err());
        assert!(parse_grid("nan").is_err());
    }
}
