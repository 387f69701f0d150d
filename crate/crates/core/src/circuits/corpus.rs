use super::{parse_qasm_named, ProgramProfile};

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        const SOURCES: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../../corpus/", $name, ".qasm")))),*
        ];

        /// Names of the bundled benchmarks, smallest first.
        pub const CORPUS_NAMES: &[&str] = &[$($name),*];
    };
}

bundled!(
    "iswap_n2",
    "grover_n2",
    "toffoli_n3",
    "fredkin_n3",
    "linearsolver_n3",
    "adder_n4",
    "inverseqft_n4",
    "qec_en_n5",
    "simon_n6",
    "adder_n10",
);

pub fn corpus_program(name: &str) -> Option<ProgramProfile> {
    SOURCES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, src)| parse_qasm_named(n, src).expect("bundled corpus parses"))
}

/// Every bundled benchmark, smallest first.
pub fn corpus() -> Vec<ProgramProfile> {
    SOURCES
        .iter()
        .map(|(n, src)| parse_qasm_named(n, src).expect("bundled corpus parses"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_parses_and_sizes_match_names() {
        let all = corpus();
        assert_eq!(all.len(), CORPUS_NAMES.len());
        for p in &all {
            let n: usize = p.name.rsplit("_n").next().unwrap().parse().unwrap();
            assert_eq!(p.logical_qubits, n, "{}", p.name);
        }
    }

    #[test]
    fn adder_n4_matches_hand_count() {
        // adder_n4.qasm has ten `cx` lines.
        let p = corpus_program("adder_n4").unwrap();
        assert_eq!(p.logical_qubits, 4);
        assert_eq!(p.cx_count, 10);
    }
}
