//! Short-time framing shared by the pitch tracker, the energy contour and the
//! mel-cepstral front end: 25 ms windows advanced by 10 ms.

pub const WINDOW_SECONDS: f64 = 0.025;
pub const HOP_SECONDS: f64 = 0.010;

/// Samples per analysis window at `sample_rate`.
pub fn window_len(sample_rate: u32) -> usize {
    (WINDOW_SECONDS * sample_rate as f64).round() as usize
}

/// Samples per hop at `sample_rate`.
pub fn hop_len(sample_rate: u32) -> usize {
    (HOP_SECONDS * sample_rate as f64).round() as usize
}

/// Number of full windows that fit in `n_samples`; zero when the signal is
/// shorter than one window.
pub fn frame_count(n_samples: usize, sample_rate: u32) -> usize {
    let win = window_len(sample_rate);
    let hop = hop_len(sample_rate);
    if n_samples < win {
        0
    } else {
        (n_samples - win) / hop + 1
    }
}

/// Iterator over the start offsets of every full frame.
pub fn frame_starts(n_samples: usize, sample_rate: u32) -> impl Iterator<Item = usize> {
    let hop = hop_len(sample_rate);
    (0..frame_count(n_samples, sample_rate)).map(move |i| i * hop)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_second_at_16k_has_98_frames() {
        assert_eq!(window_len(16_000), 400);
        assert_eq!(hop_len(16_000), 160);
        assert_eq!(frame_count(16_000, 16_000), 98);
    }

    #[test]
    fn short_signal_has_no_frames() {
        assert_eq!(frame_count(399, 16_000), 0);
        assert_eq!(frame_count(400, 16_000), 1);
    }
}
