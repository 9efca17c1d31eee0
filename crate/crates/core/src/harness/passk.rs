use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("domain error: {0}")]
pub struct DomainError(pub String);

/// Binomial coefficient, `None` on u128 overflow. C(a, b) = 0 when b > a.
fn binomial(a: u64, b: u64) -> Option<u128> {
    if b > a {
        return Some(0);
    }
    let b = b.min(a - b);
    let mut acc: u128 = 1;
    for i in 0..b {
        // acc * (a - i) is divisible by (i + 1) after multiplication.
        acc = acc.checked_mul(u128::from(a - i))? / u128::from(i + 1);
    }
    Some(acc)
}

/// Probability that at least one of `k` attempts drawn without replacement
/// from `n` attempts, `c` of them correct, is correct.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, DomainError> {
    if c > n {
        return Err(DomainError(format!("c = {c} exceeds n = {n}")));
    }
    if k == 0 || k > n {
        return Err(DomainError(format!("k = {k} must lie in 1..={n}")));
    }
    if n - c < k {
        return Ok(1.0);
    }
    match (binomial(n - c, k), binomial(n, k)) {
        (Some(miss), Some(total)) => Ok((total - miss) as f64 / total as f64),
        _ => {
            // prod_{i = n-c+1}^{n} (1 - k / i)
            let miss: f64 = ((n - c + 1)..=n).map(|i| 1.0 - k as f64 / i as f64).product();
            Ok(1.0 - miss)
        }
    }
}
