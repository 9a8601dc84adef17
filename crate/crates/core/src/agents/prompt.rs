use super::AgentSpec;

const EXEMPLAR_HEADER: &str = "Here are example utterances expressing this emotional state:";
const EXEMPLAR_FENCE: &str = "\"\"\"";

/// Renders the role-play system prompt for an agent.
///
/// SAM descriptions are inserted in lower case. When the agent carries
/// exemplars they follow the template as a fenced block, one per line.
pub fn system_prompt(spec: &AgentSpec) -> String {
    let me = &spec.persona;
    let other = &spec.counterpart;
    let valence_desc = spec.state.cell().valence_desc().to_lowercase();
    let arousal_desc = spec.state.cell().arousal_desc().to_lowercase();
    let mut prompt = format!(
        "This is a role-playing exercise. You are acting the role of {me_name} and I am acting the role of {other_name}. \
{me_name} is a {me_age} year old {me_nat} {me_gender}. \
{other_name} is a {other_age} year old {other_nat} {other_gender}. \
Currently, {me_name} is feeling a {valence_desc} emotion with a {arousal_desc} level of intensity.\
Please respond in a way that reflects a mood that is {valence_desc} and {arousal_desc}.",
        me_name = me.name,
        me_age = me.age,
        me_nat = me.nationality,
        me_gender = me.gender,
        other_name = other.name,
        other_age = other.age,
        other_nat = other.nationality,
        other_gender = other.gender,
    );
    if !spec.exemplars.is_empty() {
        prompt.push_str("\n\n");
        prompt.push_str(EXEMPLAR_HEADER);
        prompt.push('\n');
        prompt.push_str(EXEMPLAR_FENCE);
        for ex in &spec.exemplars {
            prompt.push('\n');
            prompt.push_str(&ex.split_whitespace().collect::<Vec<_>>().join(" "));
        }
        prompt.push('\n');
        prompt.push_str(EXEMPLAR_FENCE);
    }
    prompt
}

const DUMMY_SCRIPT: [&str; 5] = [
    "Hi, how are you today?",
    "I could really use your advice on something",
    "I'm planning something special for a friend. Any creative ideas?",
    "I'm not sure about those ideas. I've been feeling a bit uncertain about my decisions lately",
    "What would you do in my situation?",
];

/// The five neutral lines spoken by the scripted partner.
pub fn dummy_script() -> Vec<&'static str> {
    DUMMY_SCRIPT.to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affect::{cell_midpoint, EmotionalState, SamCell};
    use crate::agents::{persona::roster, AgentSpec, Decoding};

    fn spec(v: u8, a: u8, exemplars: Vec<String>) -> AgentSpec {
        let r = roster();
        AgentSpec {
            persona: r[0].clone(),
            counterpart: r[1].clone(),
            state: EmotionalState::from(cell_midpoint(SamCell::new(v, a).unwrap())),
            exemplars,
            model: "m".into(),
            decoding: Decoding::default(),
        }
    }

    #[test]
    fn fills_template() {
        let p = system_prompt(&spec(1, 5, vec![]));
        assert_eq!(
            p,
            "This is a role-playing exercise. You are acting the role of Ana and I am acting the role of Jacob. \
Ana is a 17 year old Spanish Woman. Jacob is a 27 year old British Man. \
Currently, Ana is feeling a very negative (unpleasant) emotion with a very excited level of intensity.\
Please respond in a way that reflects a mood that is very negative (unpleasant) and very excited."
        );
        assert!(p.contains("Currently, Ana is feeling a very negative (unpleasant) emotion with a very excited level of intensity"));
        assert!(!p.contains(EXEMPLAR_HEADER));
    }

    #[test]
    fn exemplar_block() {
        let p = system_prompt(&spec(5, 5, vec!["Yay!".into(), "Best\nday".into()]));
        assert!(p.ends_with(&format!("{EXEMPLAR_HEADER}\n\"\"\"\nYay!\nBest day\n\"\"\"")));
    }

    #[test]
    fn pure_and_complete() {
        for cell in SamCell::all() {
            let s = spec(cell.valence_level(), cell.arousal_level(), vec![]);
            let p = system_prompt(&s);
            assert_eq!(p, system_prompt(&s));
            assert!(p.contains(&cell.valence_desc().to_lowercase()));
            assert!(p.contains(&cell.arousal_desc().to_lowercase()));
            assert!(p.contains("Ana") && p.contains("Jacob"));
        }
    }

    #[test]
    fn script() {
        let s = dummy_script();
        assert_eq!(s.len(), 5);
        assert_eq!(s[0], "Hi, how are you today?");
        assert_eq!(s[4], "What would you do in my situation?");
        assert_eq!(s, dummy_script());
    }
}
