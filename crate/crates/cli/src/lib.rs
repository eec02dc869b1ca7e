//! Configuration, orchestration and artifact writers behind the `rydent` binary.

pub mod config;
pub mod output;
pub mod pipeline;

pub use config::RunConfig;

/// Short machine-readable name for the innermost library error, if any.
pub fn error_kind(err: &anyhow::Error) -> &'static str {
    use rydent::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Argument(_) => "argument",
                E::Domain(_) => "domain",
                E::Escape { .. } => "escape",
                E::DegenerateFrame(_) => "degenerate_frame",
                E::FrameConstruction(_) => "frame_construction",
                E::NearPole { .. } => "near_pole",
                E::OpenChannel { .. } => "open_channel",
                E::DegenerateRoot { .. } => "degenerate_root",
                E::QuadratureQuality(_) => "quadrature_quality",
                E::WindowTooNarrow(_) => "window_too_narrow",
                E::Range(_) => "range",
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return "config";
        }
    }
    "other"
}
