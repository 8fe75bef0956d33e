//! Hook for the in-kernel capture backend.
//!
//! The probes and kernel-side matcher live in a separate, privileged
//! component that writes 24-byte records straight into a
//! [`RingProducer`](crate::ring::RingProducer) via `push_wire`. This crate
//! only reports whether that backend is present.

/// Kernel features the capture backend needs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelSupport {
    pub release: Option<String>,
    pub backend_built: bool,
}

/// Best-effort probe of the running kernel. Only the release string is read;
/// feature detection beyond that belongs to the capture backend.
pub fn detect() -> KernelSupport {
    KernelSupport {
        release: std::fs::read_to_string("/proc/sys/kernel/osrelease")
            .ok()
            .map(|s| s.trim().to_string()),
        backend_built: false,
    }
}

pub fn unavailable_reason() -> &'static str {
    "live eBPF capture is not built into this binary; use replay or simulate"
}
