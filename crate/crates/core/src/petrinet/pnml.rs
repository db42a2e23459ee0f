//! PNML subset reader and writer.
//!
//! Accepted elements (namespaces ignored, nesting under `<net>`/`<page>` free):
//!
//! * `<place id="..">` with optional `<initialMarking><text>N</text></initialMarking>`.
//! * `<transition id="..">` with optional `<name><text>label</text></name>`. A missing
//!   or empty name, or `<toolspecific activity="$invisible$"/>`, makes the transition
//!   silent. The weight is read from a `weight` attribute, a `<weight>` child (text
//!   content or nested `<text>`), or `<toolspecific><property key="weight">`;
//!   absent weights default to 1.0.
//! * `<arc source=".." target="..">` with optional `<inscription><text>N</text></inscription>`.
//!
//! If no place declares an initial marking, one token is put on the unique
//! place without incoming arcs. Priority data is ignored with a warning.

use roxmltree::{Document, Node};

use super::{NetBuilder, NetError, StochasticWorkflowNet};

pub fn parse_pnml(text: &str) -> Result<StochasticWorkflowNet, NetError> {
    let (net, warnings) = parse_pnml_with_warnings(text)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(net)
}

/// Parses and returns non-fatal findings alongside the net.
pub fn parse_pnml_with_warnings(
    text: &str,
) -> Result<(StochasticWorkflowNet, Vec<String>), NetError> {
    let doc = Document::parse(text)?;
    let mut builder = NetBuilder::new();
    let mut warnings = Vec::new();

    let net_root = doc
        .descendants()
        .find(|n| n.has_tag_name_local("net"))
        .ok_or_else(|| NetError::Malformed("no <net> element".into()))?;

    for node in net_root.descendants().filter(Node::is_element) {
        match node.tag_name().name() {
            "place" => {
                let id = required_id(&node, "place")?;
                let tokens = match child(&node, "initialMarking") {
                    Some(m) => Some(parse_count(&text_of(&m), "initialMarking")?),
                    None => None,
                };
                builder.place(id, tokens);
            }
            "transition" => {
                let id = required_id(&node, "transition")?;
                let label = child(&node, "name").map(|n| text_of(&n));
                let silent = node.children().any(|c| {
                    c.has_tag_name_local("toolspecific")
                        && c.attribute("activity") == Some("$invisible$")
                });
                let label = if silent { None } else { label };
                let weight = transition_weight(&node)?;
                if let Some(p) = transition_priority(&node) {
                    if p.trim() != "1" {
                        warnings.push(format!(
                            "transition `{id}`: priority {p} ignored (all priorities are treated as 1)"
                        ));
                    }
                }
                builder.transition(id, label.as_deref().map(str::trim), weight.unwrap_or(1.0));
            }
            "arc" => {
                let source = node
                    .attribute("source")
                    .ok_or_else(|| NetError::Malformed("arc without source".into()))?;
                let target = node
                    .attribute("target")
                    .ok_or_else(|| NetError::Malformed("arc without target".into()))?;
                let multiplicity = match child(&node, "inscription") {
                    Some(i) => parse_count(&text_of(&i), "inscription")?,
                    None => 1,
                };
                builder.arc(source, target, multiplicity);
            }
            _ => {}
        }
    }
    Ok((builder.build()?, warnings))
}

trait LocalName {
    fn has_tag_name_local(&self, name: &str) -> bool;
}

impl LocalName for Node<'_, '_> {
    fn has_tag_name_local(&self, name: &str) -> bool {
        self.is_element() && self.tag_name().name() == name
    }
}

fn child<'a, 'i>(node: &Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name_local(name))
}

/// Text of a nested `<text>` element, or the element's own text.
fn text_of(node: &Node) -> String {
    match child(node, "text") {
        Some(t) => t.text().unwrap_or("").trim().to_owned(),
        None => node.text().unwrap_or("").trim().to_owned(),
    }
}

fn required_id<'a>(node: &Node<'a, '_>, kind: &str) -> Result<&'a str, NetError> {
    node.attribute("id")
        .ok_or_else(|| NetError::Malformed(format!("{kind} without id")))
}

fn parse_count(text: &str, what: &str) -> Result<u32, NetError> {
    text.parse()
        .map_err(|_| NetError::Malformed(format!("{what} `{text}` is not a non-negative integer")))
}

fn parse_weight(text: &str) -> Result<f64, NetError> {
    text.trim()
        .parse()
        .map_err(|_| NetError::Malformed(format!("weight `{text}` is not a number")))
}

fn toolspecific_property<'a>(node: &Node<'a, '_>, key: &str) -> Option<String> {
    node.children()
        .filter(|c| c.has_tag_name_local("toolspecific"))
        .flat_map(|ts| ts.children())
        .find(|p| p.has_tag_name_local("property") && p.attribute("key") == Some(key))
        .map(|p| p.text().unwrap_or("").trim().to_owned())
}

fn transition_weight(node: &Node) -> Result<Option<f64>, NetError> {
    if let Some(w) = node.attribute("weight") {
        return parse_weight(w).map(Some);
    }
    if let Some(w) = child(node, "weight") {
        return parse_weight(&text_of(&w)).map(Some);
    }
    toolspecific_property(node, "weight")
        .map(|w| parse_weight(&w))
        .transpose()
}

fn transition_priority(node: &Node) -> Option<String> {
    node.attribute("priority")
        .map(str::to_owned)
        .or_else(|| child(node, "priority").map(|p| text_of(&p)))
        .or_else(|| toolspecific_property(node, "priority"))
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Serializes `net` in the subset accepted by [`parse_pnml`]. Initial
/// markings are written explicitly.
pub fn to_pnml(net: &StochasticWorkflowNet) -> String {
    let mut s = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<pnml>\n");
    s.push_str("  <net id=\"net\" type=\"http://www.pnml.org/version-2009/grammar/ptnet\">\n");
    s.push_str("    <page id=\"page\">\n");
    for (p, id) in net.places().iter().enumerate() {
        let id = escape(id);
        s.push_str(&format!(
            "      <place id=\"{id}\"><name><text>{id}</text></name><initialMarking><text>{}</text></initialMarking></place>\n",
            net.initial_marking().tokens(p)
        ));
    }
    for t in net.transitions() {
        s.push_str(&format!("      <transition id=\"{}\">", escape(&t.id)));
        if let Some(l) = &t.label {
            s.push_str(&format!("<name><text>{}</text></name>", escape(l)));
        }
        s.push_str(&format!(
            "<toolspecific tool=\"StochasticPetriNet\" version=\"0.2\"><property key=\"distributionType\">IMMEDIATE</property><property key=\"weight\">{}</property></toolspecific></transition>\n",
            t.weight
        ));
    }
    for (i, arc) in net.arcs().iter().enumerate() {
        s.push_str(&format!(
            "      <arc id=\"arc{i}\" source=\"{}\" target=\"{}\">",
            escape(&arc.source),
            escape(&arc.target)
        ));
        if arc.multiplicity != 1 {
            s.push_str(&format!(
                "<inscription><text>{}</text></inscription>",
                arc.multiplicity
            ));
        }
        s.push_str("</arc>\n");
    }
    s.push_str("    </page>\n  </net>\n</pnml>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::petrinet::tests::example_net;

    const EXAMPLE: &str = r#"<?xml version="1.0"?>
<pnml xmlns="http://www.pnml.org/version-2009/grammar/pnml">
 <net id="n1" type="http://www.pnml.org/version-2009/grammar/ptnet">
  <page id="pg">
   <place id="source"/><place id="p2"/><place id="p3"/>
   <place id="p4"/><place id="p5"/><place id="sink"/>
   <transition id="t1"><name><text>a</text></name></transition>
   <transition id="t2" weight="0.3"><name><text>b</text></name></transition>
   <transition id="t3"><name><text>c</text></name><weight><text>0.35</text></weight></transition>
   <transition id="t4"><name><text>d</text></name>
     <toolspecific tool="StochasticPetriNet" version="0.2">
       <property key="weight">0.35</property><property key="priority">1</property>
     </toolspecific></transition>
   <transition id="t5"><name><text>tau</text></name>
     <toolspecific tool="ProM" version="6.4" activity="$invisible$"/></transition>
   <arc id="a1" source="source" target="t1"/>
   <arc id="a2" source="t1" target="p2"/><arc id="a3" source="t1" target="p3"/>
   <arc id="a4" source="p2" target="t2"/><arc id="a5" source="t2" target="p4"/>
   <arc id="a6" source="p3" target="t3"/><arc id="a7" source="p3" target="t4"/>
   <arc id="a8" source="t3" target="p5"/><arc id="a9" source="t4" target="p5"/>
   <arc id="a10" source="p4" target="t5"/><arc id="a11" source="p5" target="t5"/>
   <arc id="a12" source="t5" target="sink"/>
  </page>
 </net>
</pnml>"#;

    #[test]
    fn parses_example_net() {
        let (net, warnings) = parse_pnml_with_warnings(EXAMPLE).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(net.transitions().len(), 5);
        assert_eq!(net.places().len(), 6);
        assert_eq!(net, example_net());
    }

    #[test]
    fn minimal_net() {
        let net = parse_pnml(
            r#"<pnml><net id="n"><place id="i"/><place id="o"/>
               <transition id="t"><name><text>a</text></name></transition>
               <arc id="x" source="i" target="t"/><arc id="y" source="t" target="o"/></net></pnml>"#,
        )
        .unwrap();
        assert_eq!(net.places().len(), 2);
        assert_eq!(net.transitions().len(), 1);
        assert_eq!(net.transition(0).weight, 1.0);
        assert_eq!(net.initial_marking().tokens(0), 1);
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(matches!(parse_pnml("<pnml><net"), Err(NetError::Xml(_))));
        assert!(matches!(parse_pnml("<pnml/>"), Err(NetError::Malformed(_))));
        let two_tokens = r#"<pnml><net id="n"><place id="i"><initialMarking><text>2</text></initialMarking></place></net></pnml>"#;
        assert!(matches!(
            parse_pnml(two_tokens),
            Err(NetError::UnsafeMarking { .. })
        ));
        let zero_weight = r#"<pnml><net id="n"><transition id="t" weight="0"/></net></pnml>"#;
        assert!(matches!(
            parse_pnml(zero_weight),
            Err(NetError::InvalidWeight { .. })
        ));
        let dup = r#"<pnml><net id="n"><place id="x"/><place id="x"/></net></pnml>"#;
        assert!(matches!(parse_pnml(dup), Err(NetError::DuplicateId(_))));
    }

    #[test]
    fn priority_other_than_one_warns() {
        let doc = r#"<pnml><net id="n"><place id="i"/><place id="o"/>
            <transition id="t"><name><text>a</text></name><toolspecific tool="StochasticPetriNet">
            <property key="priority">2</property></toolspecific></transition>
            <arc id="x" source="i" target="t"/><arc id="y" source="t" target="o"/></net></pnml>"#;
        let (_, warnings) = parse_pnml_with_warnings(doc).unwrap();
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn round_trip() {
        let net = example_net();
        assert_eq!(parse_pnml(&to_pnml(&net)).unwrap(), net);
    }
}
