//! Power spectrum of a real windowed frame: radix-2 FFT for power-of-two
//! lengths, direct DFT otherwise (frames are short, so O(n^2) is acceptable).

/// One-sided power spectrum of `samples` (bins 0..=n/2), scaled so that the
/// sum over one-sided bins equals the window-compensated mean square of the
/// signal: non-edge bins are doubled and everything is divided by
/// `n * sum(w^2)` with `w` already applied by the caller via `window_norm`.
pub fn one_sided_power(samples: &[f64], window_norm: f64) -> Vec<f64> {
    let n = samples.len();
    let (re, im) = if n.is_power_of_two() {
        fft_radix2(samples)
    } else {
        dft(samples)
    };
    let half = n / 2;
    let scale = 1.0 / (n as f64 * window_norm);
    (0..=half)
        .map(|k| {
            let mag2 = re[k] * re[k] + im[k] * im[k];
            let doubling = if k == 0 || (n % 2 == 0 && k == half) {
                1.0
            } else {
                2.0
            };
            doubling * mag2 * scale
        })
        .collect()
}

fn fft_radix2(samples: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len();
    debug_assert!(n.is_power_of_two());
    let mut re: Vec<f64> = samples.to_vec();
    let mut im = vec![0.0; n];

    // bit-reversal permutation
    let mut j = 0usize;
    for i in 0..n {
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
        let mut m = n >> 1;
        while m >= 1 && j & m != 0 {
            j ^= m;
            m >>= 1;
        }
        j |= m;
    }

    let mut len = 2;
    while len <= n {
        let angle = -2.0 * std::f64::consts::PI / len as f64;
        let (w_im, w_re) = angle.sin_cos();
        let mut start = 0;
        while start < n {
            let mut cur_re = 1.0;
            let mut cur_im = 0.0;
            for k in 0..len / 2 {
                let a = start + k;
                let b = a + len / 2;
                let t_re = cur_re * re[b] - cur_im * im[b];
                let t_im = cur_re * im[b] + cur_im * re[b];
                re[b] = re[a] - t_re;
                im[b] = im[a] - t_im;
                re[a] += t_re;
                im[a] += t_im;
                let next_re = cur_re * w_re - cur_im * w_im;
                cur_im = cur_re * w_im + cur_im * w_re;
                cur_re = next_re;
            }
            start += len;
        }
        len <<= 1;
    }
    (re, im)
}

fn dft(samples: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len();
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    for (k, (rk, ik)) in re.iter_mut().zip(im.iter_mut()).enumerate() {
        let w = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
        for (t, &x) in samples.iter().enumerate() {
            let (s, c) = (w * t as f64).sin_cos();
            *rk += x * c;
            *ik += x * s;
        }
    }
    (re, im)
}
