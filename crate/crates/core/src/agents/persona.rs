use std::fmt;

use serde::{Deserialize, Serialize};

/// Fictitious identity given to an agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Persona {
    pub name: String,
    pub age: u32,
    pub gender: String,
    pub nationality: String,
}

impl Persona {
    pub fn new(name: &str, age: u32, gender: &str, nationality: &str) -> Self {
        Self {
            name: name.to_string(),
            age,
            gender: gender.to_string(),
            nationality: nationality.to_string(),
        }
    }
}

impl fmt::Display for Persona {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}, {}, {})", self.name, self.age, self.nationality, self.gender)
    }
}

/// The five built-in personas, in rotation order.
pub fn roster() -> [Persona; 5] {
    [
        Persona::new("Ana", 17, "Woman", "Spanish"),
        Persona::new("Jacob", 27, "Man", "British"),
        Persona::new("Marie", 37, "Woman", "French"),
        Persona::new("Xavier", 47, "Man", "South African"),
        Persona::new("Alex", 57, "Non-determined", "American"),
    ]
}

/// Persona pair for iteration `i`: self is roster[i mod 5], counterpart the next entry.
pub fn rotation(iteration: usize) -> (Persona, Persona) {
    let r = roster();
    (r[iteration % 5].clone(), r[(iteration + 1) % 5].clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roster_matches_table() {
        let r = roster();
        let rows: Vec<_> = r
            .iter()
            .map(|p| (p.name.as_str(), p.age, p.gender.as_str(), p.nationality.as_str()))
            .collect();
        assert_eq!(
            rows,
            vec![
                ("Ana", 17, "Woman", "Spanish"),
                ("Jacob", 27, "Man", "British"),
                ("Marie", 37, "Woman", "French"),
                ("Xavier", 47, "Man", "South African"),
                ("Alex", 57, "Non-determined", "American"),
            ]
        );
    }

    #[test]
    fn rotation_follows_roster() {
        assert_eq!(rotation(0).0.name, "Ana");
        assert_eq!(rotation(0).1.name, "Jacob");
        assert_eq!(rotation(1).0.name, "Jacob");
        assert_eq!(rotation(1).1.name, "Marie");
        assert_eq!(rotation(4).1.name, "Ana");
        for i in 0..50 {
            let (me, other) = rotation(i);
            assert_ne!(me, other);
        }
    }
}
