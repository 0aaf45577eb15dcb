//! Renders the three component inputs for one example and parses a model
//! output back into a label and explanation.

use hhd::template::{render_explainer_input, render_hinted_input};
use hhd::{
    parse_component_output, render_reasoning_input, render_reasoning_target, Article, Explanation, Headline, Label,
    LabeledExample, TemplateConfig,
};

fn main() -> hhd::Result<()> {
    let cfg = TemplateConfig::default();
    let example = LabeledExample::unlabeled(
        "wwe",
        Article::new("WWE SmackDown Results 2/9/19", "The February 9, 2019 episode of SmackDown featured a title match.")?,
        Headline::new("WWE SmackDown results - 2/9/21")?,
    );
    let explanation = Explanation::new("conflicting dates - 2021 vs 2019.");

    println!("reasoning input:\n  {}", render_reasoning_input(&example, &cfg));
    println!("hinted input:\n  {}", render_hinted_input(&example, &explanation, &cfg));
    println!("explainer input:\n  {}", render_explainer_input(&example, Label::Contradict, &cfg));

    let target = render_reasoning_target(Label::Contradict, &explanation, &cfg);
    println!("reasoning target:\n  {target}");

    let (label, parsed) = parse_component_output(&target, &cfg)?;
    assert_eq!((label, &parsed), (Label::Contradict, &explanation));
    println!("parsed: {} / {}", label.as_str(), parsed.as_str());

    // Only the first delimiter splits; later ones stay in the explanation.
    let (_, tricky) = parse_component_output("Entail because it says so because of the date", &cfg)?;
    println!("first split only: {:?}", tricky.as_str());

    match parse_component_output("Maybe because unclear", &cfg) {
        Ok(_) => unreachable!(),
        Err(e) => println!("unknown class token rejected: {e}"),
    }
    Ok(())
}
