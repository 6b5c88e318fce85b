#include <doctest.h>

#include <cstdlib>

#include "halluscore/aggregation.hpp"
#include "halluscore/analysis.hpp"
#include "halluscore/io.hpp"
#include "halluscore/scorers.hpp"
#include "support.hpp"

using namespace halluscore;
using testsupport::make_token;

namespace {

EntityObservation obs(double score, Label label, std::vector<PosTag> pos,
                      std::vector<std::optional<NerTag>> ner, PositionClass position) {
    return {score, label, std::move(pos), std::move(ner), position};
}

// "Ada Lovelace was born in London." with one token per word and the period
// split off.
GenerationTrace small_trace() {
    GenerationTrace t;
    t.doc_id = "d";
    t.generated_text = "Ada Lovelace was born in London.";
    const std::vector<std::pair<std::size_t, std::size_t>> spans = {
        {0, 3}, {4, 8}, {8, 12}, {13, 16}, {17, 21}, {22, 24}, {25, 31}, {31, 32}};
    const std::vector<std::size_t> words = {0, 1, 1, 2, 3, 4, 5, 5};
    const std::vector<PosTag> pos = {PosTag::PROPN, PosTag::PROPN, PosTag::PROPN, PosTag::AUX,
                                     PosTag::VERB,  PosTag::ADP,   PosTag::PROPN, PosTag::PUNCT};
    for (std::size_t i = 0; i < spans.size(); ++i) {
        auto tok = make_token(spans[i].first, spans[i].second, -1.0);
        tok.word_index_in_sentence = words[i];
        tok.pos_tag = pos[i];
        t.tokens.push_back(tok);
    }
    t.tokens[0].ner_tag = t.tokens[1].ner_tag = t.tokens[2].ner_tag = NerTag::PERSON;
    t.tokens[6].ner_tag = NerTag::GPE;
    return t;
}

}  // namespace

TEST_CASE("position classes") {
    CHECK(position_class(0, 20) == PositionClass::first);
    CHECK(position_class(5, 20) == PositionClass::first);
    CHECK(position_class(6, 20) == PositionClass::middle);
    CHECK(position_class(10, 20) == PositionClass::middle);
    CHECK(position_class(13, 20) == PositionClass::middle);
    CHECK(position_class(14, 20) == PositionClass::last);
    CHECK(position_class(19, 20) == PositionClass::last);
    CHECK(position_class(3, 5) == PositionClass::first);
    CHECK(position_class(6, 12) == PositionClass::last);
    CHECK(position_class(6, 13) == PositionClass::middle);
    CHECK(to_string(PositionClass::middle) == "middle");
}

TEST_CASE("sentence word counts come from the largest word index") {
    auto t = small_trace();
    CHECK(sentence_word_counts(t) == std::vector<std::size_t>{6});
    t.tokens[7].sentence_index = 2;
    t.tokens[7].word_index_in_sentence = 0;
    CHECK(sentence_word_counts(t) == std::vector<std::size_t>{6, 0, 1});
}

TEST_CASE("confusion cells") {
    ConfusionCell c{1, 2, 2, 3};
    CHECK(*c.fpr() == 0.5);
    CHECK(*c.fnr() == 0.75);
    CHECK_FALSE(ConfusionCell{}.fpr().has_value());
    CHECK_FALSE(ConfusionCell{}.fnr().has_value());
    c += ConfusionCell{1, 0, 0, 0};
    CHECK(c == ConfusionCell{2, 2, 2, 3});
}

TEST_CASE("error breakdown") {
    SUBCASE("two supported entities, one predicted hallucinated") {
        const std::vector<EntityObservation> e = {
            obs(0.9, Label::supported, {PosTag::PROPN}, {NerTag::PERSON}, PositionClass::first),
            obs(0.1, Label::supported, {PosTag::PROPN}, {NerTag::GPE}, PositionClass::last)};
        const auto b = error_breakdown(e, 0.5);
        CHECK(b.threshold == 0.5);
        CHECK(*b.pos.at("PROPN").fpr() == 0.5);
        CHECK_FALSE(b.pos.at("PROPN").fnr().has_value());
        CHECK(b.ner.at("PERSON") == ConfusionCell{0, 1, 0, 0});
        CHECK(b.position.at("last") == ConfusionCell{0, 0, 1, 0});
    }
    SUBCASE("perfect classifier") {
        const std::vector<EntityObservation> e = {
            obs(0.9, Label::hallucinated, {PosTag::NUM}, {std::nullopt}, PositionClass::middle),
            obs(0.1, Label::supported, {PosTag::NUM, PosTag::NOUN}, {NerTag::DATE, std::nullopt},
                PositionClass::middle)};
        const auto b = error_breakdown(e, 0.5);
        for (const auto* table : {&b.pos, &b.ner, &b.position}) {
            for (const auto& [key, cell] : *table) {
                CHECK(cell.fpr().value_or(0.0) == 0.0);
                CHECK(cell.fnr().value_or(0.0) == 0.0);
            }
        }
        CHECK(b.ner.at("NONE") == ConfusionCell{1, 0, 1, 0});
        CHECK(b.pos.at("NOUN") == ConfusionCell{0, 0, 1, 0});
    }
}

TEST_CASE("breakdown counts are conserved and monotone in the threshold") {
    testsupport::Rng rng(17);
    for (int i = 0; i < 50; ++i) {
        const auto t = testsupport::random_trace(rng, "d");
        const auto d = testsupport::random_document(rng, t);
        const auto a = align(d, t);
        const auto s = aggregate(score_likelihood(t), a);
        const auto o = observe_entities(d, t, a, s);
        REQUIRE(o.size() == d.entities.size());

        std::map<std::string, std::pair<std::size_t, std::size_t>> incidences;  // supported, hallucinated
        for (const auto& e : o) {
            for (PosTag p : e.pos_tags) {
                auto& inc = incidences[std::string(to_string(p))];
                (e.label == Label::hallucinated ? inc.second : inc.first) += 1;
            }
        }
        std::vector<double> thresholds = s.values;
        thresholds.push_back(-1.0);
        thresholds.push_back(1e9);
        std::sort(thresholds.begin(), thresholds.end());
        std::optional<ErrorBreakdown> prev;
        for (double thr : thresholds) {
            const auto b = error_breakdown(o, thr);
            for (const auto& [key, cell] : b.pos) {
                CHECK(cell.fp + cell.tn == incidences[key].first);
                CHECK(cell.fn + cell.tp == incidences[key].second);
            }
            if (prev) {
                for (const auto& [key, cell] : b.pos) {
                    const auto& before = prev->pos.at(key);
                    if (cell.fpr() && before.fpr()) CHECK(*cell.fpr() <= *before.fpr());
                    if (cell.fnr() && before.fnr()) CHECK(*cell.fnr() >= *before.fnr());
                }
            }
            prev = b;
        }
    }
}

TEST_CASE("observations and tag statistics") {
    const auto t = small_trace();
    AnnotatedDocument d{"d", "Ada", t.generated_text,
                        {{0, "Ada Lovelace", 0, 12, Label::supported},
                         {1, "London", 25, 31, Label::hallucinated}}};
    const auto a = align(d, t);
    EntityScores s{"d", Method::likelihood, {0.2, 0.7}, a.ranges};
    const auto o = observe_entities(d, t, a, s);
    REQUIRE(o.size() == 2);
    CHECK(o[0].pos_tags == std::vector<PosTag>{PosTag::PROPN});
    CHECK(o[0].ner_tags == std::vector<std::optional<NerTag>>{NerTag::PERSON});
    CHECK(o[0].position == PositionClass::first);
    CHECK(o[1].score == 0.7);
    CHECK(o[1].label == Label::hallucinated);

    const auto st = tag_stats(d, t, a);
    // "Ada", "Lovelace" (two tokens, one word), "London"
    CHECK(st.total_words == 3);
    CHECK(st.pos.at("PROPN") == TagCount{3, 1});
    CHECK(st.ner.at("PERSON") == TagCount{2, 0});
    CHECK(st.ner.at("GPE") == TagCount{1, 1});
    CHECK(TagStats::rate(st.ner.at("PERSON")) == 0.0);
    CHECK(TagStats::share(st.ner.at("GPE"), st.total_words) == doctest::Approx(1.0 / 3.0));

    TagStats sum = st;
    sum += st;
    CHECK(sum.total_words == 6);
    CHECK(sum.pos.at("PROPN") == TagCount{6, 2});
}

TEST_CASE("single supported entity has zero hallucination rate") {
    const auto t = small_trace();
    AnnotatedDocument d{"d", "Ada", t.generated_text, {{0, "London", 25, 31, Label::supported}}};
    const auto st = tag_stats(d, t, align(d, t));
    CHECK(TagStats::rate(st.pos.at("PROPN")) == 0.0);
}

TEST_CASE("sample rendering") {
    const auto t = small_trace();
    AnnotatedDocument d{"d<1>", "Ada & co", t.generated_text,
                        {{0, "Ada Lovelace", 0, 12, Label::supported},
                         {1, "London", 25, 31, Label::hallucinated}}};
    EntityScores s{"d<1>", Method::focus, {0.5, 2.0}, {{0, 2}, {6, 6}}};
    const auto html = render_sample_html(d, s);
    CHECK(html.find("data-doc-id=\"d&lt;1&gt;\"") != std::string::npos);
    CHECK(html.find("<h3>Ada &amp; co</h3>") != std::string::npos);
    CHECK(html.find("rgba(220,38,38,1.000);outline:2px solid #991b1b;") != std::string::npos);
    CHECK(html.find("rgba(220,38,38,0.000);\"") != std::string::npos);
    CHECK(html == render_sample_html(d, s));

    s.values = {1.5, 1.5};
    const auto flat = render_sample_html(d, s);
    CHECK(flat.find("1.000") == std::string::npos);
    CHECK(flat.find("rgba(220,38,38,0.000)") != std::string::npos);
}

TEST_CASE("breakdown chart") {
    ConfusionTable table{{"first", {1, 1, 3, 0}}, {"last", {0, 0, 0, 2}}};
    const auto svg = render_breakdown_svg("FPR & FNR", table, position_keys());
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("FPR &amp; FNR") != std::string::npos);
    CHECK(svg.find("first FPR: 0.250") != std::string::npos);
    CHECK(svg.find("last FPR: n/a") != std::string::npos);
    CHECK(svg.find("middle") == std::string::npos);
}

TEST_CASE("fixture document renders to the golden file") {
    const auto docs = io::load_dataset(testsupport::fixture("mini_dataset.jsonl"));
    const auto traces = io::load_traces(testsupport::fixture("mini_traces.jsonl"));
    REQUIRE(docs.size() == traces.size());
    std::string rendered;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        const auto scores = aggregate(score_focus(traces[i]), align(docs[i], traces[i]));
        rendered += render_sample_html(docs[i], scores);
    }
    const auto path = testsupport::golden("mini_focus_samples.html");
    if (std::getenv("HALLUSCORE_UPDATE_GOLDEN")) io::write_file(path, rendered);
    CHECK(rendered == io::read_file(path));
}
