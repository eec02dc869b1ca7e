use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The electron energy reached the ionization threshold; the trajectory is terminated.
    #[error("trajectory escaped after {kicks} kicks (electron energy {eps:e} >= 0)")]
    Escape { kicks: usize, eps: f64 },

    #[error("degenerate molecular frame: |J - L| = {0:e}")]
    DegenerateFrame(f64),

    #[error("frame transformation is not orthogonal (max deviation {0:e})")]
    FrameConstruction(f64),

    #[error("phase shift {delta} rad lies within {distance:e} of a tangent pole")]
    NearPole { delta: f64, distance: f64 },

    #[error("channel N={n} is open at E={energy:e} (threshold {threshold:e})")]
    OpenChannel { n: i64, energy: f64, threshold: f64 },

    #[error("degenerate root at E={energy:e}: singular values {smallest:e}, {next:e}")]
    DegenerateRoot {
        energy: f64,
        smallest: f64,
        next: f64,
    },

    #[error("overlap table asymmetry {0:e} exceeds tolerance")]
    QuadratureQuality(f64),

    #[error("wavepacket captured norm {0:.6} below 0.999; widen the eigenstate window")]
    WindowTooNarrow(f64),

    #[error("range error: {0}")]
    Range(String),
}

pub type Result<T> = std::result::Result<T, Error>;
