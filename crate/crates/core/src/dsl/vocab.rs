//! Fixed vocabulary of the goal DSL: predicate and function signatures, the
//! object type hierarchy, and the closed sets of colors, orientations, sides
//! and directly nameable objects.

use std::collections::BTreeSet;

/// The kind of value a predicate or function argument slot accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum ArgKind {
    Object,
    Color,
    Orientation,
    Side,
    /// An object, or a type name (`same_type`).
    ObjectOrType,
    /// An object, or a color (`same_color`).
    ObjectOrColor,
}

impl ArgKind {
    /// Variable class that may fill a slot of this kind.
    pub fn var_class(self) -> VarClass {
        match self {
            ArgKind::Color => VarClass::Color,
            ArgKind::Orientation => VarClass::Orientation,
            ArgKind::Side => VarClass::Side,
            ArgKind::Object | ArgKind::ObjectOrType | ArgKind::ObjectOrColor => VarClass::Object,
        }
    }

    pub fn accepts_class(self, class: VarClass) -> bool {
        match self {
            ArgKind::ObjectOrColor => matches!(class, VarClass::Object | VarClass::Color),
            other => other.var_class() == class,
        }
    }
}

/// Variable classes, distinguished syntactically by their first letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum VarClass {
    Object,
    Color,
    Orientation,
    Side,
}

impl VarClass {
    pub const ALL: [VarClass; 4] = [VarClass::Object, VarClass::Color, VarClass::Orientation, VarClass::Side];

    /// Classifies a variable name such as `?b`, `?x1`, `?y`, `?z2`.
    pub fn of_variable(name: &str) -> Option<VarClass> {
        let rest = name.strip_prefix('?')?;
        let mut chars = rest.chars();
        let first = chars.next()?;
        let tail_ok = |allow_letters: bool| {
            rest[1..]
                .chars()
                .all(|c| c.is_ascii_digit() || (allow_letters && (c.is_ascii_lowercase() || c == '_')))
        };
        match first {
            'x' if tail_ok(false) => Some(VarClass::Color),
            'y' if tail_ok(false) => Some(VarClass::Orientation),
            'z' if tail_ok(false) => Some(VarClass::Side),
            'a'..='w' if tail_ok(true) => Some(VarClass::Object),
            _ => None,
        }
    }

    /// Prefix used when generating fresh variable names.
    pub fn fresh_prefix(self) -> &'static str {
        match self {
            VarClass::Object => "?v",
            VarClass::Color => "?x",
            VarClass::Orientation => "?y",
            VarClass::Side => "?z",
        }
    }

    /// Token standing for any variable of this class in n-gram streams and
    /// abstract structures.
    pub fn placeholder(self) -> &'static str {
        match self {
            VarClass::Object => "<obj>",
            VarClass::Color => "<color>",
            VarClass::Orientation => "<orientation>",
            VarClass::Side => "<side>",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            VarClass::Object => "object",
            VarClass::Color => "color",
            VarClass::Orientation => "orientation",
            VarClass::Side => "side",
        }
    }
}

/// Argument signature of a predicate or function.
#[derive(Debug, Clone, Copy)]
pub struct Signature {
    pub name: &'static str,
    pub args: &'static [ArgKind],
    /// Extra trailing optional argument of the same kind as the last one.
    pub optional_tail: Option<ArgKind>,
}

impl Signature {
    pub fn accepts_arity(&self, n: usize) -> bool {
        n == self.args.len() || (self.optional_tail.is_some() && n == self.args.len() + 1)
    }

    pub fn kind_at(&self, i: usize) -> Option<ArgKind> {
        if i < self.args.len() {
            Some(self.args[i])
        } else if i == self.args.len() {
            self.optional_tail
        } else {
            None
        }
    }

    pub fn arities(&self) -> Vec<usize> {
        let mut v = vec![self.args.len()];
        if self.optional_tail.is_some() {
            v.push(self.args.len() + 1);
        }
        v
    }
}

use ArgKind::*;

const fn sig(name: &'static str, args: &'static [ArgKind]) -> Signature {
    Signature { name, args, optional_tail: None }
}

pub const PREDICATES: &[Signature] = &[
    sig("above", &[Object, Object]),
    sig("adjacent", &[Object, Object]),
    Signature { name: "adjacent_side", args: &[Object, Side, Object], optional_tail: Some(Side) },
    sig("agent_crouches", &[]),
    sig("agent_holds", &[Object]),
    sig("between", &[Object, Object, Object]),
    sig("broken", &[Object]),
    sig("equal_x_position", &[Object, Object]),
    sig("equal_z_position", &[Object, Object]),
    sig("faces", &[Object, Object]),
    sig("game_over", &[]),
    sig("game_start", &[]),
    sig("in", &[Object, Object]),
    sig("in_motion", &[Object]),
    sig("is_setup_object", &[Object]),
    sig("near", &[Object, Object]),
    sig("object_orientation", &[Object, Orientation]),
    sig("on", &[Object, Object]),
    sig("open", &[Object]),
    sig("opposite", &[Object, Object]),
    sig("rug_color_under", &[Object, Color]),
    sig("same_color", &[Object, ObjectOrColor]),
    sig("same_object", &[Object, Object]),
    sig("same_type", &[Object, ObjectOrType]),
    sig("toggled_on", &[Object]),
    sig("touch", &[Object, Object]),
];

pub const FUNCTIONS: &[Signature] = &[
    sig("building_size", &[Object]),
    sig("distance", &[Object, Object]),
    Signature { name: "distance_side", args: &[Object, Side, Object], optional_tail: Some(Side) },
    sig("x_position", &[Object]),
];

pub fn predicate(name: &str) -> Option<&'static Signature> {
    PREDICATES.iter().find(|s| s.name == name)
}

pub fn function(name: &str) -> Option<&'static Signature> {
    FUNCTIONS.iter().find(|s| s.name == name)
}

/// Objects that may be referred to directly by name.
pub const OBJECT_NAMES: &[&str] = &[
    "agent",
    "bed",
    "desk",
    "door",
    "floor",
    "main_light_switch",
    "mirror",
    "room_center",
    "rug",
    "side_table",
    "bottom_drawer",
    "bottom_shelf",
    "east_sliding_door",
    "east_wall",
    "north_wall",
    "south_wall",
    "top_drawer",
    "top_shelf",
    "west_sliding_door",
    "west_wall",
];

pub const COLORS: &[&str] = &[
    "blue", "brown", "gray", "green", "orange", "pink", "purple", "red", "tan", "white", "yellow",
];
pub const ORIENTATIONS: &[&str] = &["diagonal", "sideways", "upright", "upside_down"];
pub const SIDES: &[&str] = &["back", "front", "left", "right"];

/// Coarse object categories used by role-filler statistics and behavioral
/// characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum Category {
    Agent,
    AnyObject,
    Balls,
    Blocks,
    Building,
    Colors,
    Furniture,
    LargeObjects,
    Orientations,
    Ramps,
    Receptacles,
    RoomFeatures,
    Sides,
    SmallObjects,
}

impl Category {
    pub fn label(self) -> &'static str {
        match self {
            Category::Agent => "agent",
            Category::AnyObject => "any_object",
            Category::Balls => "balls",
            Category::Blocks => "blocks",
            Category::Building => "building",
            Category::Colors => "colors",
            Category::Furniture => "furniture",
            Category::LargeObjects => "large_objects",
            Category::Orientations => "orientations",
            Category::Ramps => "ramps",
            Category::Receptacles => "receptacles",
            Category::RoomFeatures => "room_features",
            Category::Sides => "sides",
            Category::SmallObjects => "small_objects",
        }
    }
}

/// One entry of the object type hierarchy: `(type, parent, category)`.
type TypeRow = (&'static str, Option<&'static str>, Category);

const TYPES: &[TypeRow] = &[
    ("game_object", None, Category::AnyObject),
    ("agent", None, Category::Agent),
    ("building", None, Category::Building),
    // blocks
    ("block", Some("game_object"), Category::Blocks),
    ("bridge_block", Some("block"), Category::Blocks),
    ("bridge_block_green", Some("bridge_block"), Category::Blocks),
    ("bridge_block_pink", Some("bridge_block"), Category::Blocks),
    ("bridge_block_tan", Some("bridge_block"), Category::Blocks),
    ("cube_block", Some("block"), Category::Blocks),
    ("cube_block_blue", Some("cube_block"), Category::Blocks),
    ("cube_block_tan", Some("cube_block"), Category::Blocks),
    ("cube_block_yellow", Some("cube_block"), Category::Blocks),
    ("cylindrical_block", Some("block"), Category::Blocks),
    ("cylindrical_block_blue", Some("cylindrical_block"), Category::Blocks),
    ("cylindrical_block_green", Some("cylindrical_block"), Category::Blocks),
    ("cylindrical_block_tan", Some("cylindrical_block"), Category::Blocks),
    ("flat_block", Some("block"), Category::Blocks),
    ("flat_block_gray", Some("flat_block"), Category::Blocks),
    ("flat_block_tan", Some("flat_block"), Category::Blocks),
    ("flat_block_yellow", Some("flat_block"), Category::Blocks),
    ("pyramid_block", Some("block"), Category::Blocks),
    ("pyramid_block_blue", Some("pyramid_block"), Category::Blocks),
    ("pyramid_block_red", Some("pyramid_block"), Category::Blocks),
    ("pyramid_block_yellow", Some("pyramid_block"), Category::Blocks),
    ("tall_cylindrical_block", Some("block"), Category::Blocks),
    ("tall_cylindrical_block_green", Some("tall_cylindrical_block"), Category::Blocks),
    ("tall_cylindrical_block_tan", Some("tall_cylindrical_block"), Category::Blocks),
    ("tall_cylindrical_block_yellow", Some("tall_cylindrical_block"), Category::Blocks),
    ("tall_rectangular_block", Some("block"), Category::Blocks),
    ("tall_rectangular_block_blue", Some("tall_rectangular_block"), Category::Blocks),
    ("tall_rectangular_block_green", Some("tall_rectangular_block"), Category::Blocks),
    ("tall_rectangular_block_tan", Some("tall_rectangular_block"), Category::Blocks),
    ("triangle_block", Some("block"), Category::Blocks),
    ("triangle_block_blue", Some("triangle_block"), Category::Blocks),
    ("triangle_block_green", Some("triangle_block"), Category::Blocks),
    ("triangle_block_tan", Some("triangle_block"), Category::Blocks),
    // balls
    ("ball", Some("game_object"), Category::Balls),
    ("beachball", Some("ball"), Category::Balls),
    ("basketball", Some("ball"), Category::Balls),
    ("dodgeball", Some("ball"), Category::Balls),
    ("dodgeball_blue", Some("dodgeball"), Category::Balls),
    ("dodgeball_red", Some("dodgeball"), Category::Balls),
    ("dodgeball_pink", Some("dodgeball"), Category::Balls),
    ("golfball", Some("ball"), Category::Balls),
    ("golfball_green", Some("golfball"), Category::Balls),
    ("golfball_white", Some("golfball"), Category::Balls),
    // furniture
    ("bed", Some("game_object"), Category::Furniture),
    ("blinds", Some("game_object"), Category::Furniture),
    ("desk", Some("game_object"), Category::Furniture),
    ("desktop", Some("game_object"), Category::Furniture),
    ("main_light_switch", Some("game_object"), Category::Furniture),
    ("side_table", Some("game_object"), Category::Furniture),
    ("shelf_desk", Some("game_object"), Category::Furniture),
    // large objects
    ("book", Some("game_object"), Category::LargeObjects),
    ("chair", Some("game_object"), Category::LargeObjects),
    ("laptop", Some("game_object"), Category::LargeObjects),
    ("pillow", Some("game_object"), Category::LargeObjects),
    ("teddy_bear", Some("game_object"), Category::LargeObjects),
    // ramps
    ("ramp", Some("game_object"), Category::Ramps),
    ("curved_wooden_ramp", Some("ramp"), Category::Ramps),
    ("triangular_ramp", Some("ramp"), Category::Ramps),
    ("triangular_ramp_green", Some("triangular_ramp"), Category::Ramps),
    ("triangular_ramp_tan", Some("triangular_ramp"), Category::Ramps),
    // receptacles
    ("doggie_bed", Some("game_object"), Category::Receptacles),
    ("hexagonal_bin", Some("game_object"), Category::Receptacles),
    ("drawer", Some("game_object"), Category::Receptacles),
    ("bottom_drawer", Some("drawer"), Category::Receptacles),
    ("top_drawer", Some("drawer"), Category::Receptacles),
    // room features
    ("door", Some("game_object"), Category::RoomFeatures),
    ("floor", Some("game_object"), Category::RoomFeatures),
    ("mirror", Some("game_object"), Category::RoomFeatures),
    ("poster", Some("game_object"), Category::RoomFeatures),
    ("room_center", Some("game_object"), Category::RoomFeatures),
    ("rug", Some("game_object"), Category::RoomFeatures),
    ("shelf", Some("game_object"), Category::RoomFeatures),
    ("bottom_shelf", Some("shelf"), Category::RoomFeatures),
    ("top_shelf", Some("shelf"), Category::RoomFeatures),
    ("sliding_door", Some("game_object"), Category::RoomFeatures),
    ("east_sliding_door", Some("sliding_door"), Category::RoomFeatures),
    ("west_sliding_door", Some("sliding_door"), Category::RoomFeatures),
    ("wall", Some("game_object"), Category::RoomFeatures),
    ("east_wall", Some("wall"), Category::RoomFeatures),
    ("north_wall", Some("wall"), Category::RoomFeatures),
    ("south_wall", Some("wall"), Category::RoomFeatures),
    ("west_wall", Some("wall"), Category::RoomFeatures),
    // small objects
    ("alarm_clock", Some("game_object"), Category::SmallObjects),
    ("cellphone", Some("game_object"), Category::SmallObjects),
    ("cd", Some("game_object"), Category::SmallObjects),
    ("credit_card", Some("game_object"), Category::SmallObjects),
    ("key_chain", Some("game_object"), Category::SmallObjects),
    ("lamp", Some("game_object"), Category::SmallObjects),
    ("mug", Some("game_object"), Category::SmallObjects),
    ("pen", Some("game_object"), Category::SmallObjects),
    ("pencil", Some("game_object"), Category::SmallObjects),
    ("watch", Some("game_object"), Category::SmallObjects),
];

fn type_row(name: &str) -> Option<&'static TypeRow> {
    TYPES.iter().find(|row| row.0 == name)
}

/// All object type names, in hierarchy-table order.
pub fn object_types() -> impl Iterator<Item = &'static str> {
    TYPES.iter().map(|row| row.0)
}

pub fn is_object_type(name: &str) -> bool {
    type_row(name).is_some()
}

pub fn is_object_name(name: &str) -> bool {
    OBJECT_NAMES.contains(&name)
}

pub fn is_color(name: &str) -> bool {
    COLORS.contains(&name)
}

pub fn is_orientation(name: &str) -> bool {
    ORIENTATIONS.contains(&name)
}

pub fn is_side(name: &str) -> bool {
    SIDES.contains(&name)
}

/// Is `name` a constant the grammar allows as a term?
pub fn is_known_constant(name: &str) -> bool {
    is_object_name(name) || is_object_type(name) || is_color(name) || is_orientation(name) || is_side(name)
}

/// The type followed by all of its ancestors, most specific first.
pub fn ancestors(type_name: &str) -> Vec<&'static str> {
    let mut out = Vec::new();
    let mut cur = type_row(type_name);
    while let Some(row) = cur {
        out.push(row.0);
        cur = row.1.and_then(type_row);
    }
    out
}

/// Does an object of type `ty` satisfy a declaration of type `decl`?
pub fn is_subtype(ty: &str, decl: &str) -> bool {
    if ty == decl {
        return true;
    }
    if decl == "game_object" {
        return ty != "agent" && ty != "building" && (type_row(ty).is_some() || !ty.is_empty());
    }
    ancestors(ty).contains(&decl)
}

/// Coarse category of a type or constant name.
pub fn category_of(name: &str) -> Option<Category> {
    if let Some(row) = type_row(name) {
        return Some(row.2);
    }
    if is_color(name) || name == "color" {
        Some(Category::Colors)
    } else if is_orientation(name) || name == "orientation" {
        Some(Category::Orientations)
    } else if is_side(name) || name == "side" {
        Some(Category::Sides)
    } else {
        None
    }
}

/// Color encoded in a type name suffix, e.g. `dodgeball_blue` → `blue`.
pub fn color_of_type(type_name: &str) -> Option<&'static str> {
    let suffix = type_name.rsplit('_').next()?;
    COLORS.iter().copied().find(|c| *c == suffix)
}

/// The predicates recorded in the play-trace database.
pub const DATABASE_PREDICATES: &[&str] = &[
    "above",
    "adjacent",
    "agent_crouches",
    "agent_holds",
    "broken",
    "game_start",
    "game_over",
    "in",
    "in_motion",
    "object_orientation",
    "on",
    "open",
    "toggled_on",
    "touch",
];

/// Predicates the interpreter does not ground; they always evaluate false.
pub const UNGROUNDED_PREDICATES: &[&str] =
    &["between", "faces", "adjacent_side", "opposite", "rug_color_under"];

pub fn all_type_names() -> BTreeSet<&'static str> {
    object_types().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variable_classes() {
        assert_eq!(VarClass::of_variable("?b"), Some(VarClass::Object));
        assert_eq!(VarClass::of_variable("?b1"), Some(VarClass::Object));
        assert_eq!(VarClass::of_variable("?x"), Some(VarClass::Color));
        assert_eq!(VarClass::of_variable("?x2"), Some(VarClass::Color));
        assert_eq!(VarClass::of_variable("?y"), Some(VarClass::Orientation));
        assert_eq!(VarClass::of_variable("?z0"), Some(VarClass::Side));
        assert_eq!(VarClass::of_variable("?xa"), None);
        assert_eq!(VarClass::of_variable("b"), None);
    }

    #[test]
    fn hierarchy() {
        assert_eq!(ancestors("dodgeball_blue"), vec!["dodgeball_blue", "dodgeball", "ball", "game_object"]);
        assert!(is_subtype("dodgeball", "ball"));
        assert!(is_subtype("top_drawer", "drawer"));
        assert!(!is_subtype("ball", "dodgeball"));
        assert!(is_subtype("chair", "game_object"));
        assert!(!is_subtype("agent", "game_object"));
        assert_eq!(category_of("dodgeball"), Some(Category::Balls));
        assert_eq!(category_of("top_shelf"), Some(Category::RoomFeatures));
        assert_eq!(color_of_type("cube_block_yellow"), Some("yellow"));
    }

    #[test]
    fn signatures() {
        assert_eq!(PREDICATES.len(), 26);
        let s = predicate("adjacent_side").unwrap();
        assert!(s.accepts_arity(3) && s.accepts_arity(4) && !s.accepts_arity(2));
        assert_eq!(predicate("agent_holds").unwrap().args.len(), 1);
    }
}
