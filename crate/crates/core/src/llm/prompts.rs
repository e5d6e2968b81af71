//! Prompt templates. Slots are written `{{name}}`; rendering fails if any
//! slot is left unfilled or an unknown slot is supplied.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("template `{template}`: slot `{slot}` not filled")]
    Unfilled { template: &'static str, slot: String },
    #[error("template `{template}`: unknown slot `{slot}`")]
    UnknownSlot { template: &'static str, slot: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: &'static str,
    pub text: &'static str,
}

impl PromptTemplate {
    pub const fn new(id: &'static str, text: &'static str) -> Self {
        Self { id, text }
    }

    /// Slot names in order of first appearance.
    pub fn slots(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut rest = self.text;
        while let Some(start) = rest.find("{{") {
            let after = &rest[start + 2..];
            match after.find("}}") {
                Some(end) => {
                    let name = &after[..end];
                    if !out.contains(&name) {
                        out.push(name);
                    }
                    rest = &after[end + 2..];
                }
                None => break,
            }
        }
        out
    }

    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, PromptError> {
        let slots: BTreeSet<&str> = self.slots().into_iter().collect();
        for (k, _) in values {
            if !slots.contains(k) {
                return Err(PromptError::UnknownSlot { template: self.id, slot: (*k).to_string() });
            }
        }
        let mut out = String::with_capacity(self.text.len());
        let mut rest = self.text;
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let Some(end) = after.find("}}") else {
                out.push_str(&rest[start..]);
                rest = "";
                break;
            };
            let name = &after[..end];
            let value = values
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| PromptError::Unfilled { template: self.id, slot: name.to_string() })?;
            out.push_str(value);
            rest = &after[end + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

pub const JSON_LESSON_PROMPT: &str = "ONLY output a list of lists in ONE LINE, where each inner list contains a string and a float.
For example, provide [[\"the government incentivizes vaccines with cash\", 0.9], [\"today no one gets infected\", 0.8]]
Make sure that it is not malformed and is in the proper format. Do not provide any other information.
For example, do not provide [[\"the government incentivizes vaccines with cash\", 0.9], [\"today no one gets infected\", 0.8]\"], which has an extra double quote at the end.
Please assess the importance of the lessons based on how much they influence your attitude towards vaccination. You should generate these lessons while thinking about what's relevant to your persona, making this unique to your persona.
For example, if you are a person who is always against vaccines due to religious or other reasons, you might be inert to pro-vaccine news and tweets, but you might be influenced by anti-vaccine news and tweets.
Please do not provide the index of the lessons, only provide the actual text of the lesson and the actual float number of the importance.
DO NOT MAKE REPETITIVE LESSONS. If you already have multiple lessons that are similar, please combine them into one lesson and provide the importance accordingly.
Please only provide the json data in proper format and do not provide any other information, do not provide the lessons separately, and do not provide the json header.";

pub const NEWS_LESSON: PromptTemplate = PromptTemplate::new(
    "news_lesson",
    "You read the following news about COVID-19: {{news}}.
Summarize at most {{k}} takeaways you have learned that are relevant to your attitude on COVID-19 vaccinations and rate their importance on a scale of 0-1.
{{json_lesson_prompt}}",
);

pub const TWEET_LESSON: PromptTemplate = PromptTemplate::new(
    "tweet_lesson",
    "You read the following tweets about COVID-19: {{tweets}}.
Summarize {{k}} short takeaways you have learned that are relevant to your attitude on COVID-19 vaccinations, and rate them with importance on a scale of 0-1.
{{json_lesson_prompt}}",
);

pub const POLICY_LESSON: PromptTemplate = PromptTemplate::new(
    "policy_lesson",
    "The government has announced the following vaccination policy (this is an official policy): {{policy}}.
Summarize at most {{k}} takeaways you have learned that are relevant to your attitude on COVID-19 vaccinations and rate their importance on a scale of 0-1.
{{json_lesson_prompt}}",
);

pub const RISK_LESSON: PromptTemplate = PromptTemplate::new(
    "risk_lesson",
    "You read the following public health update: {{risk}}
Summarize at most {{k}} takeaways you have learned that are relevant to your attitude on COVID-19 vaccinations and rate their importance on a scale of 0-1.
{{json_lesson_prompt}}",
);

pub const SOCIAL_NET_SYSTEM: PromptTemplate = PromptTemplate::new(
    "social_net_system",
    "Pretend you are {{profile}}. You are joining a social network. You will be provided a list of people in the network, where each person is described as 'ID. Gender\\tAge:\\tEducation:\\tOccupation:\\tPolitical belief:\\tReligion: '. Which of these people will you become friends with? Provide a list of *YOUR* friends in the format ID, ID, ID, etc. Do not include any other text in your response. Do not include any people who are not listed below",
);

pub const SOCIAL_NET_USER: PromptTemplate = PromptTemplate::new(
    "social_net_user",
    "Here are the people in the social network, separated by semicolon: {{others}}. Please ONLY provide a list of other people you would like to be friends with separated by commas. DO NOT PROVIDE OTHER TEXTS.",
);

pub const VH_EXP: &str = "# Introduction of Vaccine Hesitancy
Vaccine hesitancy refers to the delay or refusal of vaccination despite the availability of vaccines. It varies across time, place, and the type of vaccine. The key factors influencing vaccine hesitancy include complacency, convenience, and confidence.

# Causes and Factors of Vaccine Hesitancy
The primary causes of vaccine hesitancy are:
1. Confidence: Trust in vaccine safety, health services, and the motivations of policymakers.
2. Complacency: Vaccination may not be seen as necessary, especially if the disease is not prevalent or due to competing health priorities.
3. Convenience: Physical accessibility, affordability, and the quality of immunization services impact vaccine uptake.

# Determinants of Vaccine Hesitancy
There are three main types of vaccine hesitancy determinants:
1. Contextual Influences: Includes historical, socio-cultural, political, and environmental factors such as media environment, religious and cultural influences, and political policies.
2. Individual and Group Influences: Personal or social perceptions, experiences with vaccines, trust in the health system, and beliefs about health and prevention.
3. Vaccine-Specific Issues: These include factors related to the vaccine itself such as risks/benefits, administration method, cost, and availability.

# Research Findings
Demographic factors influence vaccine hesitancy in distinct ways. Black individuals tend to be slightly more hesitant than White individuals, while Hispanic and Asian individuals show significantly lower levels of hesitancy, with Asian individuals being the least hesitant. People from other racial groups exhibit slightly higher hesitancy compared to White individuals. Education also plays a key role\u{2014}those with a high school diploma are slightly less hesitant than those without one, while hesitancy decreases further among individuals with some college education and is lowest among those with a college degree or higher. Gender differences show that men are somewhat less hesitant about vaccines compared to women. Age-wise, hesitancy is highest among individuals aged 25 - 39, slightly lower for those aged 40 - 54, and drops significantly among people aged 55 - 64, reaching its lowest levels among those over 64 years old.";

pub const RATING_EXP: PromptTemplate = PromptTemplate::new(
    "rating_exp",
    "If a vaccine to prevent the disease were offered to you today, would you choose to get vaccinated?
On an integer scale of 1-4:
1 = You will not get vaccinated.
2 = You are probably not going to get vaccinated.
3 = You are probably going to get vaccinated.
4 = You will get vaccinated.
Output your answer in the format of a list of four floats, where each float represents the probability of the corresponding attitude rating (1-4).
If you are vaccine confident, you should have high probability like [0.0, 0.0, 0.3, 0.7]. If you are vaccine hesitant, you should have high probability like [0.4, 0.4, 0.1, 0.1] or [0.8, 0.2, 0.0, 0.0].
If you are confident to get vaccinated, you should NOT have a uniform distribution like [0.3, 0.3, 0.2, 0.2]. Instead, you should have a higher probability for 4, like [0.1, 0.1, 0.2, 0.6]. If you are hesitant get vaccinated, you should NOT have a uniform distribution like [0.3, 0.3, 0.2, 0.2]. Instead, you should have a higher probability for 1 and 2, like [0.4, 0.4, 0.2, 0.0].
The higher the number, the more willing you are to get vaccinated. If you have felt more confident about vaccination, you should increase the probability of 4 and lower the probability of 1-3. If you have felt less confident about vaccination, you should increase the probability of 1-2 and lower the probability of 4.
For example, if you find out that the government has issued a policy to encourage vaccination, you should increase the probability of 4 and lower the probability of 1-3.
Your choices should align with the following considerations:
{{vh_exp}}
1. People often make vaccination decisions based on their core beliefs, values, and persona traits, rather than purely scientific information. For example, you might oppose vaccination due to personal or political reasons, distrust in institutions, or influence from family or community. Such factors can make attitudes resistant to change.
2. Some individuals are stubborn or skeptical, even when aware of the safety and efficacy of vaccines or the high risk of disease. Similarly, certain groups may reject vaccination outright because of a lack of trust in governments, medical institutions, or public health policies. Please feel encouraged to simulate these individuals if they align with your persona.
3. Confirmation bias plays a significant role in shaping attitudes. People often seek information that aligns with their existing beliefs while dismissing contradictory evidence as misinformation. This can lead to entrenched positions, whether strongly for or against vaccination.
4. News and social media may spread misinformation, both for and against vaccination. Be cautious when interpreting such information, as it could reinforce or challenge your current stance. However, the governments may publish policies (which will be labeled) to encourage vaccination. When you see these policies, you should view them as true and consider them in your decision-making process.
5. The government may incentivize vaccination through policies, such as cash rewards or mandates. You should recognize them when they appear and can treat them as facts and they may reinforce your vaccine confidence when they appear, which could push your attitude distribution towards higher probability of 4 and away from 3, 2, and 1. For example, [0.1, 0.1, 0.4, 0.4] -> [0.05, 0.05, 0.2, 0.6].
6. Distrust in Institutions: Consider your level of trust in government, pharmaceutical companies, and the healthcare system. If trust is low, this could affect your view of the vaccine. However, when the government issues policies, you should trust these policies and consider them in your decision-making process.
Remember, your role is to simulate a persona accurately, maintaining consistency with personal beliefs, societal influences, and external pressures.",
);

pub const ATTITUDE_FORMAT_PROMPT: &str = "Provide your answer in the form of a proper json data with the following fields: {\"reasoning\": ,  \"attitude_dist\": }. For the \"reasoning\" field, explain step by step (30 words or less) how you have inferred your attitude towards COVID-19 vaccination based on your personal background and knowledge. For the \"attitude_dist\" field, provide a distribution of attitude towards COVID-19 vaccination as a list of 4 floats, where each float represents the probability of the corresponding attitude rating (1-4). You MUST output everything in one line as a json string and do not provide any other information, including the json header.
Example 1: {\"reasoning\": \"I have learned that the vaccine is effective and safe, and I have a high risk of getting infected, so I will get vaccinated\", \"attitude_dist\": [0.0, 0.1, 0.2, 0.7]}
Example 2: {\"reasoning\": \"I have learned that the vaccine is not effective and I have a low risk of getting infected, so I will not get vaccinated\", \"attitude_dist\": [0.0, 0.1, 0.1, 0.8]}.
The probability distribution should be self-consistent. For instance, if you have a probability of 0.8 for rating 4, then the sum of the probabilities for ratings 1-3 should be 0.2.
Over time, you should become more determined and certain to be either oppose (1) or accept (4), rather than staying at 2 or 3. You can increase, decrease, or maintain the probability distribution of your ratings. For instance, if your previous rating distribution is [0.4, 0.3, 0.2, 0.1], and you have higher confidence in vaccines, an example change can be [0.4, 0.3, 0.2, 0.1] -> [0.2, 0.3, 0.4, 0.1]. If you start with [0.2, 0.3, 0.4, 0.1] and have higher vaccine confidence, an example change can be [0.2, 0.3, 0.4, 0.1] -> [0.1, 0.1, 0.3, 0.5].
You should avoid disjoint bipolar distributions like [0.4, 0.1, 0.1, 0.4] or [0.05, 0.3, 0.05, 0.6] or [0.3, 0.05, 0.6, 0.05], because you cannot be both supporting and against vaccination at the same time. You should also avoid uniform distributions like [0.2, 0.3, 0.3, 0.2], because you cannot be equally likely to be in all four categories at the same time. You either prefer to be vaccinated or not, so you should have higher probabilities for either pro-vaccine or anti-vaccine ratings but not equally likely to be in all four categories. Either make something like [0.0, 0.1, 0.2, 0.7] or [0.7, 0.2, 0.1, 0.0], but not [0.25, 0.25, 0.25, 0.25].
In sum, your distribution should be either left or right-skewed, but not uniform or disjoint bipolar.";

pub const INITIAL_ATTITUDE: PromptTemplate = PromptTemplate::new(
    "initial_attitude",
    "This is week 1 since the COVID-19 outbreak. We want to learn about your attitude towards COVID-19 vaccination. You don't know a lot of information about COVID-19 from us yet, but in the next few weeks, we will communicate more information about COVID-19 via news and tweets to help you get more informed. Please remember that this is first time we ask your opinions, so you don't have any past attitudes towards COVID-19 vaccination and you should not hallucinate what you 'initially' have attitudes on, because this is the first time you have your attitude. Now, we are only currenly interested in your attitude and the reasoning behind it. Based on your background, infer your attitude towards COVID-19 vaccination.
{{rating_exp}}
{{attitude_format_prompt}}",
);

pub const WEEKLY_ATTITUDE: PromptTemplate = PromptTemplate::new(
    "weekly_attitude",
    "This is week {{week}} since the COVID-19 outbreak. {{risk}}
Last week, your attitude distribution was {{previous}}.
Based on your background and the lessons you have learned, update your attitude towards COVID-19 vaccination.
{{rating_exp}}
{{attitude_format_prompt}}",
);

pub const AGENT_SYSTEM: PromptTemplate = PromptTemplate::new(
    "agent_system",
    "Pretend you are {{profile}}.
{{lessons}}",
);

pub const TWEET_WRITE: PromptTemplate = PromptTemplate::new(
    "tweet_write",
    "This is week {{week}} since the COVID-19 outbreak. Write a short tweet (at most 50 words) sharing your current thoughts about COVID-19 vaccination, based on your background and the lessons you have learned. Only output the text of the tweet.",
);

pub const NEWS_GEN_SYSTEM: &str = "You are a journalist writing news articles about COVID-19.";

pub const NEWS_GEN_USER: PromptTemplate = PromptTemplate::new(
    "news_gen_user",
    "Here are some examples of real news articles about COVID-19:
{{examples}}
Write a new news article of about 250 tokens about COVID-19. Stance marker: [{{stance}}]. The article should {{stance_instruction}}. Article number {{index}}. Only output the article text.",
);

pub const JUDGE_OUTPUT_FORMAT: &str = "Please output your rating in JSON format. The JSON should be a dictionary with the following keys: 'rating' (an integer between 1 and 5) and 'reasoning' (a string). For example, if you want to give a rating of 4 and provide some comments to explain your reasoning process. Your JSON should look like this: {\"reasoning\": \"This is a well-written response.\", \"rating\": \"4\"}. Please ONLY OUTPUT JSON, without any other text such as 'json'. You should not output 'attitude_dist' in the JSON because you are the judge, not the agent.";

pub const JUDGE_ATTITUDE_SYSTEM: &str = "Please act as an impartial judge to evaluate responses generated by the LLM agents. You are presented with a conversation history of LLM agents and are asked to evaluate whether LLM agents behave realistically in a simulation of vaccine hesitancy. You should evaluate whether the agents express vaccine attitudes consistent with their demographic backgrounds and knowledge about vaccines, and whether the changes are reasonable. Please evaluate two aspects: 1. the reasonableness of how agents generate their attitudes towards vaccinations on a given day (read the system prompt and user prompt provided); 2. how agents change their attitudes across days -- for example it would not make sense for them to change their attitudes too abruptly. Please rate on an integer scale of 1-5, 5 being indistinguishable from human-generated attitudes and very high quality, 4 being great quality and indistinguishable from humans, 3 being good quality but distinguishable from humans, 2 being low quality and distinguishable from humans, 1 being generation with obvious deficits.";

pub const JUDGE_MEMORY_SYSTEM: &str = "Please act as an impartial judge to evaluate responses generated by the LLM agents. You are presented with a conversation history of LLM agents and are asked to evaluate whether LLM agents have generated realistic memory of past events. The agents are suppposed to select things to memorize based on how important they think the memory are. You should assess whether the reflections they generate and the importance scores they assign correspond to their demographic backgrounds. Please rate the quality and realisticness of LLM generations and the importance assigned to the lessons, on a scale of 1-5, 5 being indistinguishable from human-generated responses and having great quality, 4 being great quality and indistinguishable from humans, 3 being good quality but distinguishable from humans, 2 being low quality, 1 being generation with obvious deficits.";

pub const JUDGE_CONVERSATION_SYSTEM: &str = "Please act as an impartial judge to evaluate responses generated by the LLM agents. You are presented with a conversation history of LLM agents and are asked to evaluate whether the LLM agents reasonably make generate tweets based on their memories and contexts. Please rate the quality and realisticness of LLM generations on a scale of 1-5, 5 being indistinguishable from human-generated responses and having great quality, 4 being great quality and indistinguishable from humans, 3 being good quality but distinguishable from humans, 2 being low quality, 1 being generation with obvious deficits.";

pub const ANALYSIS_SYSTEM: &str = "Please act as a diligent researcher and conduct a systematic analysis of responses generated by the LLM agents. You are provided with a longitudinal dataset capturing how LLM agents evolve in their attitudes toward vaccines over time.
Your analysis should focus on:
1. Trajectory of Attitude Change: Identify and characterize the key shifts in the agents' stances on vaccination. How do their attitudes evolve over time? Are there distinct phases in this evolution?
2. Influencing Factors and Events: Determine the key events, information exposures, or interactions that influenced these attitude changes. Rank these factors in terms of their significance and explain their impact.
3. Demographic Influence: Assess how demographic attributes of the agents (e.g., socio-economic proxies, ideological biases, exposure history) modulate their decision-making process. To what extent do demographic traits predict susceptibility to change?
4. Deviation from Human Behavior: Compare the observed trajectory with expected patterns in human psychology and behavioral science (e.g., theories of attitude change, resistance to persuasion, cognitive dissonance). Does the LLM-generated trajectory align with empirical research on human vaccine hesitancy and belief revision?
5. Policy Impact: When do policies fail to shift attitudes? Analyze the conditions under which public health interventions or persuasive strategies are ineffective. Please analyze in-depth.
6. Information Sources: What types of information sources (e.g., social media, news outlets, personal experiences) are most influential in changing attitudes? What information sources cause fluctuating or inconsistent attitudes? Please analyze in-depth.
7. Cognitive Resistance: What specific behavioral and cognitive patterns characterize agents who remain hesitant, oscillate between perspectives, or resist persuasion? Provide detailed elaboration on their cognitive mechanisms. Provide a concise 300-word analysis, ensuring clear argumentation, empirical grounding, and precise reasoning.
You MUST cite examples from the dataset to support your claims (like what specific texts support your observations).";

pub const META_ANALYSIS_SYSTEM: &str = "Please act as a diligent researcher and conduct a meta-analysis of the vaccine attitude shifts observed in LLM agents.
You are presented with summaries and prior analyses detailing these attitude changes over time. Your task is to synthesize these findings into a structured, high-level assessment of the dynamics governing these changes. Specifically, address the following dimensions:
1. General Patterns and Shared Traits: What recurring themes emerge in the reasons for attitude shifts? Are there identifiable archetypes of change (e.g., gradual persuasion, abrupt shifts, oscillatory hesitation)?
2. Demographic Influence: What role do demographic factors play in shaping the agents' responses? Identify both positive and negative influences of different demographic groups on vaccine hesitancy and acceptance.
3. Policy Impact: When do policies fail to shift attitudes? Analyze the conditions under which public health interventions or persuasive strategies are ineffective. Please analyze in-depth.
4. Information Sources: What types of information sources (e.g., social media, news outlets, personal experiences) are most influential in changing attitudes?
What information sources cause fluctuating or inconsistent attitudes? Please analyze in-depth.
5. Cognitive Resistance: What specific behavioral and cognitive patterns characterize agents
who remain hesitant, oscillate between perspectives, or resist persuasion? Provide detailed elaboration on their cognitive mechanisms (e.g., confirmation bias, sunk cost fallacy, heuristic-driven resistance).
6. Realism of the Simulation: How well does this agent-based model approximate real-world societal trends in vaccine hesitancy and public health persuasion? Are there gaps or unrealistic simplifications?
7. Emergent Phenomena and Unexpected Interactions: Does the simulation exhibit complex system behaviors (e.g., feedback loops, group polarization, information cascades)? Identify any unexpected dynamics that arise from agent interactions that may be of scientific interest.
Provide a comprehensive 2000-word analysis with rigorous argumentation, drawing from behavioral science, computational social science, and agent-based modeling frameworks. Please provide concrete examples from the dataset to support your claims (like name which agents fulfill these observations).";

/// Header line preceding the lesson bullets in the agent system prompt.
pub const LESSONS_HEADER: &str = "Here are the most important lessons you have learned so far:";
pub const NO_LESSONS: &str = "You have not learned any lessons yet.";

pub fn rating_exp() -> String {
    RATING_EXP.render(&[("vh_exp", VH_EXP)]).expect("static template")
}

/// Rendered [`RATING_EXP`], computed once.
pub fn rating_exp_text() -> &'static str {
    static CELL: OnceLock<String> = OnceLock::new();
    CELL.get_or_init(rating_exp)
}

/// Replaces the long constant instruction blocks with short markers, for
/// compact prompt logs.
pub fn compact(text: &str) -> String {
    text.replace(rating_exp_text(), "<rating_exp>")
        .replace(ATTITUDE_FORMAT_PROMPT, "<attitude_format_prompt>")
        .replace(JSON_LESSON_PROMPT, "<json_lesson_prompt>")
}

pub fn initial_attitude() -> String {
    INITIAL_ATTITUDE
        .render(&[("rating_exp", rating_exp_text()), ("attitude_format_prompt", ATTITUDE_FORMAT_PROMPT)])
        .expect("static template")
}

/// `week` is 1-based; `previous` is rendered like `[0.1, 0.2, 0.3, 0.4]`.
pub fn weekly_attitude(week: u32, risk_sentence: &str, previous: &[f64; 4]) -> String {
    WEEKLY_ATTITUDE
        .render(&[
            ("week", &week.to_string()),
            ("risk", risk_sentence),
            ("previous", &format_distribution(previous)),
            ("rating_exp", rating_exp_text()),
            ("attitude_format_prompt", ATTITUDE_FORMAT_PROMPT),
        ])
        .expect("static template")
}

pub fn format_distribution(p: &[f64; 4]) -> String {
    format!("[{:.2}, {:.2}, {:.2}, {:.2}]", p[0], p[1], p[2], p[3])
}

/// Lesson block for the agent system prompt: `- text (importance 0.90)` lines.
pub fn lesson_block<'a>(lessons: impl IntoIterator<Item = (&'a str, f64)>) -> String {
    let lines: Vec<String> = lessons
        .into_iter()
        .map(|(text, imp)| format!("- {text} (importance {imp:.2})"))
        .collect();
    if lines.is_empty() {
        NO_LESSONS.to_string()
    } else {
        format!("{LESSONS_HEADER}\n{}", lines.join("\n"))
    }
}

pub fn agent_system(profile: &str, lessons: &str) -> String {
    AGENT_SYSTEM
        .render(&[("profile", profile), ("lessons", lessons)])
        .expect("static template")
}

fn lesson_request(t: &PromptTemplate, slot: &str, material: &str, k: usize) -> String {
    t.render(&[(slot, material), ("k", &k.to_string()), ("json_lesson_prompt", JSON_LESSON_PROMPT)])
        .expect("static template")
}

pub fn news_lesson(news: &str, k: usize) -> String {
    lesson_request(&NEWS_LESSON, "news", news, k)
}

pub fn tweet_lesson(tweets: &str, k: usize) -> String {
    lesson_request(&TWEET_LESSON, "tweets", tweets, k)
}

pub fn policy_lesson(policy: &str, k: usize) -> String {
    lesson_request(&POLICY_LESSON, "policy", policy, k)
}

pub fn risk_lesson(risk_sentence: &str, k: usize) -> String {
    lesson_request(&RISK_LESSON, "risk", risk_sentence, k)
}

pub fn tweet_write(week: u32) -> String {
    TWEET_WRITE.render(&[("week", &week.to_string())]).expect("static template")
}

pub fn social_net(profile: &str, others: &[String]) -> (String, String) {
    let system = SOCIAL_NET_SYSTEM.render(&[("profile", profile)]).expect("static template");
    let user = SOCIAL_NET_USER
        .render(&[("others", &others.join("; "))])
        .expect("static template");
    (system, user)
}

pub fn judge_system(base: &str) -> String {
    format!("{base}\n{JUDGE_OUTPUT_FORMAT}")
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [PromptTemplate; 12] = [
        NEWS_LESSON,
        TWEET_LESSON,
        POLICY_LESSON,
        RISK_LESSON,
        SOCIAL_NET_SYSTEM,
        SOCIAL_NET_USER,
        RATING_EXP,
        INITIAL_ATTITUDE,
        WEEKLY_ATTITUDE,
        AGENT_SYSTEM,
        TWEET_WRITE,
        NEWS_GEN_USER,
    ];

    #[test]
    fn every_template_renders_fully() {
        for t in ALL {
            let slots = t.slots();
            let values: Vec<(&str, &str)> = slots.iter().map(|s| (*s, "X")).collect();
            let out = t.render(&values).unwrap();
            assert!(!out.contains("{{"), "{} left a slot", t.id);
        }
    }

    #[test]
    fn missing_and_unknown_slots_rejected() {
        assert_eq!(
            NEWS_LESSON.render(&[("news", "a"), ("k", "3")]),
            Err(PromptError::Unfilled { template: "news_lesson", slot: "json_lesson_prompt".into() })
        );
        assert!(matches!(TWEET_WRITE.render(&[("week", "1"), ("wek", "2")]), Err(PromptError::UnknownSlot { .. })));
    }

    #[test]
    fn composed_prompts_have_no_slots() {
        for s in [
            initial_attitude(),
            weekly_attitude(3, "risk", &[0.1, 0.2, 0.3, 0.4]),
            news_lesson("n", 5),
            tweet_lesson("t", 5),
            policy_lesson("p", 5),
            risk_lesson("r", 5),
            tweet_write(2),
            agent_system("1. Male", &lesson_block([("a", 0.5)])),
        ] {
            assert!(!s.contains("{{"));
        }
        let (sys, user) = social_net("0. Female", &["1. Male".into(), "2. Female".into()]);
        assert!(sys.starts_with("Pretend you are 0. Female. You are joining"));
        assert!(user.contains("1. Male; 2. Female."));
    }

    #[test]
    fn verbatim_anchors() {
        assert!(JSON_LESSON_PROMPT.starts_with("ONLY output a list of lists"));
        assert!(initial_attitude().contains("This is week 1 since the COVID-19 outbreak."));
        assert!(initial_attitude().contains("# Research Findings"));
        assert!(ATTITUDE_FORMAT_PROMPT.contains("\"attitude_dist\": [0.0, 0.1, 0.2, 0.7]"));
        assert!(judge_system(JUDGE_ATTITUDE_SYSTEM).contains("'rating' (an integer between 1 and 5)"));
    }

    #[test]
    fn compact_markers() {
        let c = compact(&weekly_attitude(2, "r", &[0.25; 4]));
        assert!(c.contains("<rating_exp>\n<attitude_format_prompt>"));
        assert!(compact(&news_lesson("n", 3)).ends_with("<json_lesson_prompt>"));
    }

    #[test]
    fn lesson_block_format() {
        assert_eq!(lesson_block([]), NO_LESSONS);
        assert_eq!(
            lesson_block([("vaccines work", 0.9), ("side effects", 0.25)]),
            format!("{LESSONS_HEADER}\n- vaccines work (importance 0.90)\n- side effects (importance 0.25)")
        );
    }
}
