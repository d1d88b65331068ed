//! Grid geometry: cells, headings, elementary actions, distances.
//!
//! Coordinates follow raster convention: `x` grows east, `y` grows south,
//! so `North` is `-y`.

use std::fmt;

/// A grid coordinate. Always refers to an in-bounds cell of some scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    /// Chebyshev (chessboard) distance; the crate's proximity metric.
    pub fn chebyshev(self, other: Cell) -> u32 {
        let dx = (self.x - other.x).unsigned_abs();
        let dy = (self.y - other.y).unsigned_abs();
        dx.max(dy)
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        (self.x - other.x).unsigned_abs() + (self.y - other.y).unsigned_abs()
    }

    pub fn offset(self, dx: i32, dy: i32) -> Cell {
        Cell::new(self.x + dx, self.y + dy)
    }

    /// 4-neighbors in fixed N, E, S, W order (order matters for
    /// deterministic search).
    pub fn neighbors4(self) -> [Cell; 4] {
        [
            self.offset(0, -1),
            self.offset(1, 0),
            self.offset(0, 1),
            self.offset(-1, 0),
        ]
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// One of the four cardinal headings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

    /// Unit step vector of this heading.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Heading::North => (0, -1),
            Heading::East => (1, 0),
            Heading::South => (0, 1),
            Heading::West => (-1, 0),
        }
    }

    pub fn turned_left(self) -> Heading {
        match self {
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
            Heading::East => Heading::North,
        }
    }

    pub fn turned_right(self) -> Heading {
        match self {
            Heading::North => Heading::East,
            Heading::East => Heading::South,
            Heading::South => Heading::West,
            Heading::West => Heading::North,
        }
    }

    /// Position in [`ALL`](Self::ALL); clockwise order, so turning right
    /// increments it mod 4.
    pub fn index(self) -> u32 {
        match self {
            Heading::North => 0,
            Heading::East => 1,
            Heading::South => 2,
            Heading::West => 3,
        }
    }

    /// Heading that moves one step from `from` to a 4-adjacent `to`.
    pub fn towards(from: Cell, to: Cell) -> Option<Heading> {
        Heading::ALL
            .into_iter()
            .find(|h| from.offset(h.delta().0, h.delta().1) == to)
    }

    /// Letter code used by the scene and trace text formats.
    pub fn code(self) -> char {
        match self {
            Heading::North => 'N',
            Heading::East => 'E',
            Heading::South => 'S',
            Heading::West => 'W',
        }
    }

    pub fn from_code(c: char) -> Option<Heading> {
        Some(match c {
            'N' => Heading::North,
            'E' => Heading::East,
            'S' => Heading::South,
            'W' => Heading::West,
            _ => return None,
        })
    }
}

impl fmt::Display for Heading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// Primitive environment action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementaryAction {
    Forward,
    TurnLeft,
    TurnRight,
}
