//! Execution counters. The engine threads a `Metrics` through every
//! operation so optimization claims (signature-only pruning, adaptive
//! indexing, excluded pairs) are observable and testable.

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metrics {
    /// Raw archived measurement-block fetches. A signature-only plan must
    /// leave this at zero.
    pub measurements_scans: u64,
    /// Statistics answered from a stored window signature.
    pub signature_reads: u64,
    pub index_builds: u64,
    pub probes_indexed: u64,
    pub probes_scanned: u64,
    /// Pairs excluded because a correlation was undefined (zero variance,
    /// zero norm, or length mismatch).
    pub excluded_pairs: u64,
    pub rejected_late: u64,
    pub windows_assigned: u64,
    pub empty_windows: u64,
    /// Candidates dropped by the signature prefilter before any raw access.
    pub prefilter_pruned: u64,
    pub ticks: u64,
    pub output_rows: u64,
}

impl Metrics {
    pub fn merge(&mut self, other: &Metrics) {
        self.measurements_scans += other.measurements_scans;
        self.signature_reads += other.signature_reads;
        self.index_builds += other.index_builds;
        self.probes_indexed += other.probes_indexed;
        self.probes_scanned += other.probes_scanned;
        self.excluded_pairs += other.excluded_pairs;
        self.rejected_late += other.rejected_late;
        self.windows_assigned += other.windows_assigned;
        self.empty_windows += other.empty_windows;
        self.prefilter_pruned += other.prefilter_pruned;
        self.ticks += other.ticks;
        self.output_rows += other.output_rows;
    }
}
