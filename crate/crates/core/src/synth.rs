//! Seeded generators for synthetic exports and datasets, used by tests and
//! benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Dataset, DatasetBuilder, Origin};
use crate::wos::parse_wos_cr;

const SYLLABLES: &[&str] = &[
    "gar", "field", "mar", "bor", "mann", "thor", "lut", "ley", "price", "son", "ber", "ken",
    "dal", "vo", "rik", "stein", "ha", "mel", "qui", "zor", "ab", "ul", "ne", "ton",
];
const JOURNALS: &[&str] = &[
    "SCIENCE",
    "NATURE",
    "J INFORMETR",
    "SCIENTOMETRICS",
    "J AM SOC INF SCI TEC",
    "RES POLICY",
    "PHYS REV LETT",
    "LANCET",
];
const WORDS: &[&str] = &[
    "citation",
    "analysis",
    "historical",
    "roots",
    "network",
    "spectroscopy",
    "reference",
    "publication",
    "year",
    "indicators",
    "impact",
    "field",
    "normalization",
    "science",
];
const JUNK: &[&str] = &[
    ",", ", ", ";", "; ", "(", ")", ".", " ", "  ", "V", "P", "pp.", "p.", "DOI ", "doi:", "10.",
    "/", "-", "1955", "2016", "0", "7", "12", "abc", "Smith", "J.", "et al.", "é", "ß", "\u{301}",
    "\t", "[", "]", "\u{feff}", "世界", "\"", "'", "&", "3000", "999",
];

/// Deterministic generator; equal seeds give equal output.
pub struct Synth {
    rng: ChaCha8Rng,
    next_ut: u64,
    pool: Vec<String>,
    scopus_pool: Vec<String>,
}

impl Synth {
    pub fn new(seed: u64) -> Self {
        Synth {
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_ut: 1,
            pool: Vec::new(),
            scopus_pool: Vec::new(),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn pick<'a>(&mut self, items: &[&'a str]) -> &'a str {
        items.choose(&mut self.rng).copied().unwrap_or_default()
    }

    fn capitalized(word: &str) -> String {
        let mut chars = word.chars();
        match chars.next() {
            Some(c) => c.to_uppercase().chain(chars).collect(),
            None => String::new(),
        }
    }

    pub fn surname(&mut self) -> String {
        let n = self.rng.gen_range(1..=3);
        let s: String = (0..n).map(|_| self.pick(SYLLABLES)).collect();
        Self::capitalized(&s)
    }

    fn initials(&mut self) -> String {
        let n = self.rng.gen_range(1..=2);
        (0..n)
            .map(|_| char::from(b'A' + self.rng.gen_range(0..26u8)))
            .collect()
    }

    fn year(&mut self) -> i32 {
        self.rng.gen_range(1900..=2020)
    }

    fn title(&mut self, words: std::ops::Range<usize>) -> String {
        let words = self.rng.gen_range(words);
        let t: Vec<&str> = (0..words).map(|_| self.pick(WORDS)).collect();
        Self::capitalized(&t.join(" "))
    }

    /// A fresh WoS cited-reference line; some parts are randomly absent.
    pub fn fresh_wos_reference(&mut self) -> String {
        let mut parts = vec![format!(
            "{} {}",
            self.surname().to_uppercase(),
            self.initials()
        )];
        if self.rng.gen_bool(0.95) {
            parts.push(self.year().to_string());
            parts.push(self.pick(JOURNALS).to_string());
        }
        if self.rng.gen_bool(0.8) {
            parts.push(format!("V{}", self.rng.gen_range(1..400)));
        }
        if self.rng.gen_bool(0.8) {
            parts.push(format!("P{}", self.rng.gen_range(1..2000)));
        }
        if self.rng.gen_bool(0.3) {
            parts.push(format!(
                "DOI 10.{}/{}",
                self.rng.gen_range(1000..9999),
                self.rng.gen_range(10000..99999)
            ));
        }
        parts.join(", ")
    }

    /// A WoS reference, reusing an earlier one 30% of the time so counts
    /// above one occur.
    pub fn wos_reference(&mut self) -> String {
        if !self.pool.is_empty() && self.rng.gen_bool(0.3) {
            let i = self.rng.gen_range(0..self.pool.len());
            return self.pool[i].clone();
        }
        let r = self.fresh_wos_reference();
        self.pool.push(r.clone());
        r
    }

    /// A Scopus reference string.
    pub fn scopus_reference(&mut self) -> String {
        let authors: Vec<String> = (0..self.rng.gen_range(1..=3))
            .map(|_| {
                let initials: String = self.initials().chars().map(|c| format!("{c}.")).collect();
                format!("{}, {}", self.surname(), initials)
            })
            .collect();
        let title = self.title(2..6);
        let source = Self::capitalized(&self.pick(JOURNALS).to_lowercase());
        let mut s = format!(
            "{}, {} ({}) {}",
            authors.join(", "),
            title,
            self.year(),
            source
        );
        if self.rng.gen_bool(0.8) {
            s.push_str(&format!(", {}", self.rng.gen_range(1..400)));
        }
        if self.rng.gen_bool(0.8) {
            let p = self.rng.gen_range(1..2000);
            s.push_str(&format!(", pp. {}-{}", p, p + self.rng.gen_range(1..30)));
        }
        s
    }

    /// A WoS tagged export with `records` records, each with a unique
    /// accession number.
    pub fn wos_file(&mut self, records: usize) -> String {
        let mut out = String::from("FN Clarivate Analytics Web of Science\nVR 1.0\n");
        for _ in 0..records {
            out.push_str("PT J\n");
            let n_au = self.rng.gen_range(1..=3);
            for i in 0..n_au {
                let name = format!("{}, {}", self.surname(), self.initials());
                out.push_str(if i == 0 { "AU " } else { "   " });
                out.push_str(&name);
                out.push('\n');
            }
            let title = self.title(3..9);
            out.push_str(&format!("TI {title}\n"));
            out.push_str(&format!("SO {}\n", self.pick(JOURNALS)));
            out.push_str(&format!("PY {}\n", self.rng.gen_range(1990..=2024)));
            let n_cr = self.rng.gen_range(0..25);
            for i in 0..n_cr {
                let r = self.wos_reference();
                out.push_str(if i == 0 { "CR " } else { "   " });
                out.push_str(&r);
                out.push('\n');
            }
            out.push_str(&format!("NR {n_cr}\n"));
            out.push_str(&format!("UT WOS:{:015}\n", self.next_ut));
            self.next_ut += 1;
            out.push_str("ER\n\n");
        }
        out.push_str("EF\n");
        out
    }

    /// A Scopus CSV export with `rows` rows.
    pub fn scopus_csv(&mut self, rows: usize) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let header = [
            "Authors",
            "Title",
            "Year",
            "Source title",
            "Volume",
            "Page start",
            "DOI",
            "References",
            "EID",
        ];
        w.write_record(header).expect("in-memory write");
        for _ in 0..rows {
            let authors: Vec<String> = (0..self.rng.gen_range(1..=3))
                .map(|_| format!("{} {}.", self.surname(), self.initials()))
                .collect();
            let refs: Vec<String> = (0..self.rng.gen_range(0..15))
                .map(|_| {
                    if !self.scopus_pool.is_empty() && self.rng.gen_bool(0.3) {
                        let i = self.rng.gen_range(0..self.scopus_pool.len());
                        self.scopus_pool[i].clone()
                    } else {
                        let r = self.scopus_reference();
                        self.scopus_pool.push(r.clone());
                        r
                    }
                })
                .collect();
            let eid = format!("2-s2.0-{:011}", self.next_ut);
            self.next_ut += 1;
            let record = [
                authors.join(", "),
                self.title(3..9),
                self.rng.gen_range(1990..=2024).to_string(),
                Self::capitalized(&self.pick(JOURNALS).to_lowercase()),
                self.rng.gen_range(1..300).to_string(),
                self.rng.gen_range(1..900).to_string(),
                format!("10.{}/{}", self.rng.gen_range(1000..9999), self.next_ut),
                refs.join("; "),
                eid,
            ];
            w.write_record(&record).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    fn typo(&mut self, s: &str) -> String {
        let mut chars: Vec<char> = s.chars().collect();
        if chars.len() < 3 {
            return s.to_string();
        }
        let i = self.rng.gen_range(1..chars.len());
        match self.rng.gen_range(0..3) {
            0 => {
                chars.remove(i);
            }
            1 => chars[i] = char::from(b'A' + self.rng.gen_range(0..26u8)),
            _ => chars.swap(i - 1, i),
        }
        chars.into_iter().collect()
    }

    /// A WoS reference line with a small corruption: a surname typo, a
    /// dropped part, or a changed page.
    pub fn variant_of(&mut self, line: &str) -> String {
        let mut parts: Vec<String> = line.split(", ").map(str::to_string).collect();
        match self.rng.gen_range(0..4) {
            0 => parts[0] = self.typo(&parts[0]),
            1 if parts.len() > 3 => {
                parts.pop();
            }
            2 => {
                if let Some(p) = parts.iter_mut().find(|p| p.starts_with('P')) {
                    p.push_str(&format!("-{}", self.rng.gen_range(1..9)));
                }
            }
            _ => parts[0] = parts[0].to_lowercase(),
        }
        parts.join(", ")
    }

    /// A WoS dataset of `bases` distinct references, each followed by up to
    /// `max_variants` corrupted variants, spread over `pubs` publications.
    pub fn clustered_dataset(&mut self, bases: usize, max_variants: usize, pubs: usize) -> Dataset {
        let mut lines = Vec::new();
        for _ in 0..bases {
            let base = self.fresh_wos_reference();
            let n = self.rng.gen_range(0..=max_variants);
            for _ in 0..n {
                let v = self.variant_of(&base);
                lines.push(v);
            }
            lines.push(base);
        }
        let pubs = pubs.max(1);
        let mut per_pub: Vec<Vec<String>> = vec![Vec::new(); pubs];
        for line in lines {
            let copies = self.rng.gen_range(1..=3);
            for _ in 0..copies {
                let p = self.rng.gen_range(0..pubs);
                per_pub[p].push(line.clone());
            }
        }
        let mut b = DatasetBuilder::new(Origin::Wos);
        for refs in per_pub {
            b.push_publication(
                Origin::Wos,
                Vec::new(),
                None,
                refs.iter().map(|l| parse_wos_cr(l)).collect(),
            );
        }
        b.finish()
    }

    /// Arbitrary text built from reference-like fragments and stray
    /// characters.
    pub fn junk(&mut self, max_pieces: usize) -> String {
        let n = self.rng.gen_range(0..=max_pieces);
        let mut s = String::new();
        for _ in 0..n {
            if self.rng.gen_bool(0.1) {
                s.push(self.rng.gen::<char>());
            } else {
                s.push_str(self.pick(JUNK));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scopus::parse_scopus_csv;
    use crate::wos::{parse_wos, WosInput};

    #[test]
    fn same_seed_same_output() {
        assert_eq!(Synth::new(3).wos_file(5), Synth::new(3).wos_file(5));
    }

    #[test]
    fn generated_files_parse() {
        let mut s = Synth::new(11);
        let ds = parse_wos(&[WosInput::new("a", s.wos_file(20))]).unwrap();
        assert_eq!(ds.publications.len(), 20);
        ds.validate().unwrap();
        let imp = parse_scopus_csv("b.csv", s.scopus_csv(20).as_bytes()).unwrap();
        assert!(imp.row_errors.is_empty());
        assert_eq!(imp.dataset.publications.len(), 20);
    }

    #[test]
    fn clustered_dataset_is_valid() {
        let ds = Synth::new(5).clustered_dataset(30, 3, 10);
        ds.validate().unwrap();
        assert!(ds.crs.len() >= 30);
    }
}
