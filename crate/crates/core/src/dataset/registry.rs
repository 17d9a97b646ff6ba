//! The 33-letter IRCAM Tifinagh label registry.

use crate::error::{Error, Result};

/// One class: a dense index, the letter's Unicode scalar sequence, and its
/// romanized name.
///
/// Two letters (yagw, yakw) are encoded in Unicode as a base letter plus the
/// labialization mark U+2D6F, so `glyph` holds the full scalar sequence; it
/// is unique per entry and entries are ordered lexicographically by scalar
/// values, which for the 31 single-scalar letters is plain ascending
/// code-point order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabelEntry {
    pub index: u8,
    pub glyph: &'static str,
    pub name: &'static str,
}

const IRCAM_33: [(&str, &str); 33] = [
    ("\u{2D30}", "ya"),
    ("\u{2D31}", "yab"),
    ("\u{2D33}", "yag"),
    ("\u{2D33}\u{2D6F}", "yagw"),
    ("\u{2D37}", "yad"),
    ("\u{2D39}", "yadd"),
    ("\u{2D3B}", "yey"),
    ("\u{2D3C}", "yaf"),
    ("\u{2D3D}", "yak"),
    ("\u{2D3D}\u{2D6F}", "yakw"),
    ("\u{2D40}", "yah"),
    ("\u{2D43}", "yahh"),
    ("\u{2D44}", "yaa"),
    ("\u{2D45}", "yakh"),
    ("\u{2D47}", "yaq"),
    ("\u{2D49}", "yi"),
    ("\u{2D4A}", "yazh"),
    ("\u{2D4D}", "yal"),
    ("\u{2D4E}", "yam"),
    ("\u{2D4F}", "yan"),
    ("\u{2D53}", "yu"),
    ("\u{2D54}", "yar"),
    ("\u{2D55}", "yarr"),
    ("\u{2D56}", "yagh"),
    ("\u{2D59}", "yas"),
    ("\u{2D5A}", "yass"),
    ("\u{2D5B}", "yash"),
    ("\u{2D5C}", "yat"),
    ("\u{2D5F}", "yatt"),
    ("\u{2D61}", "yaw"),
    ("\u{2D62}", "yay"),
    ("\u{2D63}", "yaz"),
    ("\u{2D65}", "yazz"),
];

/// The fixed 33-class registry. Labels everywhere in this crate are indices
/// into this table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelRegistry {
    entries: Vec<LabelEntry>,
}

impl LabelRegistry {
    /// The 33 IRCAM-Tifinagh letters in ascending code-point order.
    pub fn ircam33() -> Self {
        let entries = IRCAM_33
            .iter()
            .enumerate()
            .map(|(i, &(glyph, name))| LabelEntry {
                index: i as u8,
                glyph,
                name,
            })
            .collect();
        LabelRegistry { entries }
    }

    pub fn n_classes(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[LabelEntry] {
        &self.entries
    }

    pub fn entry(&self, index: usize) -> Result<&LabelEntry> {
        self.entries.get(index).ok_or(Error::Label {
            row: 0,
            label: index,
            n_classes: self.entries.len(),
        })
    }

    pub fn name(&self, index: usize) -> Result<&'static str> {
        Ok(self.entry(index)?.name)
    }
}

impl Default for LabelRegistry {
    fn default() -> Self {
        Self::ircam33()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn exactly_33_entries_with_dense_indices() {
        let reg = LabelRegistry::ircam33();
        assert_eq!(reg.n_classes(), 33);
        for (i, e) in reg.entries().iter().enumerate() {
            assert_eq!(e.index as usize, i);
        }
    }

    #[test]
    fn glyph_sequences_unique_and_sorted() {
        let reg = LabelRegistry::ircam33();
        let glyphs: Vec<&str> = reg.entries().iter().map(|e| e.glyph).collect();
        let unique: HashSet<&&str> = glyphs.iter().collect();
        assert_eq!(unique.len(), 33);
        let mut sorted = glyphs.clone();
        sorted.sort();
        assert_eq!(glyphs, sorted, "entries must be in code-point order");
    }

    #[test]
    fn names_unique_and_all_tifinagh_block() {
        let reg = LabelRegistry::ircam33();
        let names: HashSet<&str> = reg.entries().iter().map(|e| e.name).collect();
        assert_eq!(names.len(), 33);
        for e in reg.entries() {
            for ch in e.glyph.chars() {
                let cp = ch as u32;
                assert!(
                    (0x2D30..=0x2D7F).contains(&cp),
                    "{} has non-Tifinagh scalar U+{cp:04X}",
                    e.name
                );
            }
        }
    }

    #[test]
    fn lookup_out_of_range_errors() {
        let reg = LabelRegistry::ircam33();
        assert!(reg.entry(32).is_ok());
        assert!(reg.entry(33).is_err());
    }
}
