//! Bundled icon sprites, stored as ASCII bitmaps (`#` = ink).

use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpriteKind {
    Tree,
    Conifer,
    Marsh,
    Grass,
    Wave,
    House,
    Orchard,
}

const ART: [(SpriteKind, &str); 7] = [
    (
        SpriteKind::Tree,
        "\
...###...
..#####..
.#######.
.#######.
..#####..
....#....
....#....",
    ),
    (
        SpriteKind::Conifer,
        "\
....#....
...###...
..#####..
...###...
..#####..
.#######.
....#....",
    ),
    (
        SpriteKind::Marsh,
        "\
.#..#..#.
.#..#..#.
..#.#.#..
#########",
    ),
    (
        SpriteKind::Grass,
        "\
.#.#.#.
..###..
...#...",
    ),
    (
        SpriteKind::Wave,
        "\
.##....##.
#..#..#..#
....##....",
    ),
    (
        SpriteKind::House,
        "\
...#...
..###..
.#####.
#######
#.#.#.#
#######",
    ),
    (
        SpriteKind::Orchard,
        "\
.###.
#...#
#.#.#
#...#
.###.",
    ),
];

#[derive(Debug, Clone)]
pub struct Sprite {
    pub kind: SpriteKind,
    pub width: u32,
    pub height: u32,
    bits: Vec<bool>,
}

impl Sprite {
    fn parse(kind: SpriteKind, art: &str) -> Self {
        let rows: Vec<&str> = art.lines().collect();
        let width = rows.iter().map(|r| r.len()).max().unwrap_or(0);
        let mut bits = vec![false; width * rows.len()];
        for (y, row) in rows.iter().enumerate() {
            for (x, ch) in row.bytes().enumerate() {
                bits[y * width + x] = ch == b'#';
            }
        }
        Self { kind, width: width as u32, height: rows.len() as u32, bits }
    }

    #[inline]
    pub fn ink(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize]
    }
}

pub fn sprite(kind: SpriteKind) -> &'static Sprite {
    static SHEET: OnceLock<Vec<Sprite>> = OnceLock::new();
    let sheet = SHEET.get_or_init(|| ART.iter().map(|&(k, art)| Sprite::parse(k, art)).collect());
    sheet.iter().find(|s| s.kind == kind).expect("every kind has art")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sheet_is_rectangular() {
        for (kind, art) in ART {
            let rows: Vec<&str> = art.lines().collect();
            assert!(rows.iter().all(|r| r.len() == rows[0].len()), "{kind:?}");
            let s = sprite(kind);
            assert!(s.bits.iter().any(|&b| b));
        }
        assert!(sprite(SpriteKind::Tree).ink(4, 6));
        assert!(!sprite(SpriteKind::Tree).ink(0, 0));
    }
}
