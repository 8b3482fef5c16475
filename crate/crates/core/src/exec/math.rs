//! Lane-level arithmetic shared by the interpreter, the IR runtime, and
//! constant folding. Every function is strict IEEE-754 single precision
//! with no fused operations.

/// `origin * c + unused * (1 - c)`, with the endpoints returned exactly.
pub fn mix(origin: f32, unused: f32, c: f32) -> f32 {
    if c == 1.0 {
        origin
    } else if c == 0.0 {
        unused
    } else {
        origin * c + unused * (1.0 - c)
    }
}

pub fn fmin(a: f32, b: f32) -> f32 {
    if b < a {
        b
    } else {
        a
    }
}

pub fn fmax(a: f32, b: f32) -> f32 {
    if a < b {
        b
    } else {
        a
    }
}

pub fn fclamp(x: f32, lo: f32, hi: f32) -> f32 {
    fmin(fmax(x, lo), hi)
}

pub fn iclamp(x: i32, lo: i32, hi: i32) -> i32 {
    x.max(lo).min(hi)
}

pub fn rsq(x: f32) -> f32 {
    1.0 / x.sqrt()
}

pub fn sin(x: f32) -> f32 {
    libm::sinf(x)
}

pub fn cos(x: f32) -> f32 {
    libm::cosf(x)
}

pub fn floor(x: f32) -> f32 {
    libm::floorf(x)
}

pub fn sqrt(x: f32) -> f32 {
    x.sqrt()
}

pub fn fabs(x: f32) -> f32 {
    x.abs()
}

pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut sum = a[0] * b[0];
    for i in 1..a.len() {
        sum += a[i] * b[i];
    }
    sum
}

pub fn normalize(v: &[f32]) -> Vec<f32> {
    let len = dot(v, v).sqrt();
    v.iter().map(|x| x / len).collect()
}

pub fn f32_to_i32(x: f32) -> i32 {
    x as i32
}

pub fn i32_to_f32(x: i32) -> f32 {
    x as f32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_endpoints_are_exact() {
        for &(x, y) in &[(0.3f32, f32::INFINITY), (-0.0, 5.0), (f32::NAN, 1.0), (1e-38, f32::NAN)] {
            assert_eq!(mix(x, y, 1.0).to_bits(), x.to_bits());
            assert_eq!(mix(x, y, 0.0).to_bits(), y.to_bits());
        }
        assert_eq!(mix(2.0, 4.0, 0.5), 3.0);
    }

    #[test]
    fn min_max_follow_comparison_rule() {
        assert_eq!(fmin(1.0, 2.0), 1.0);
        assert_eq!(fmax(1.0, 2.0), 2.0);
        assert!(fmin(f32::NAN, 2.0).is_nan());
        assert_eq!(fmin(2.0, f32::NAN), 2.0);
        assert_eq!(fclamp(5.0, 0.0, 1.0), 1.0);
    }

    #[test]
    fn dot_accumulates_left_to_right() {
        assert_eq!(dot(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]), 32.0);
        assert_eq!(normalize(&[3.0, 4.0]), vec![0.6, 0.8]);
    }

    #[test]
    fn conversions_saturate() {
        assert_eq!(f32_to_i32(f32::NAN), 0);
        assert_eq!(f32_to_i32(1e20), i32::MAX);
        assert_eq!(f32_to_i32(-2.7), -2);
    }
}
