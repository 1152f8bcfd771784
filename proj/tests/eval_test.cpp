#include <gtest/gtest.h>

#include "histwhois/eval.hpp"
#include "support/fixtures.hpp"

using namespace histwhois;
using namespace histwhois::testing;

namespace {

lookup_engine two_units() {
    trie_builder b;
    for (day x = d("20200101"); x <= d("20200131"); x = x.next()) {
        b.insert_day(line("44.0.0.0/24", {1}, x));
        b.insert_day(line("44.0.1.0/24", {1}, x));
        b.insert_day(line("44.0.1.128/25", {2}, x));
        b.insert_day(line("2a00::/32", {3}, x));
    }
    return lookup_engine{std::move(b).finalize(), {}};
}

} // namespace

TEST(Eval, ExactMatchAgrees) {
    const auto engine = two_units();
    const auto ref = reference_table::parse("44.0.0.0/24|1\n");
    const auto rep = evaluate_disagreement(engine, ref, parse_eval_queries("44.0.0.7 202001\n"));
    const auto& s = rep.periods.at(period{2020, 1});
    EXPECT_EQ(s.compared, 1u);
    EXPECT_EQ(s.disagreeing, 0u);
    EXPECT_TRUE(rep.histogram.empty());
}

TEST(Eval, SubsetIsDisagreement) {
    const auto engine = two_units();
    // historic side of 44.0.1.0/24 carries the /25 more-specific too: {1, 2}
    const auto ref = reference_table::parse("44.0.1.0/24|1\n");
    const auto rep = evaluate_disagreement(engine, ref, parse_eval_queries("44.0.1.0/24 202001\n"));
    EXPECT_EQ(rep.periods.at(period{2020, 1}).disagreeing, 1u);
    EXPECT_EQ(rep.histogram.at({"1", "1_2"}), 1u);

    const auto superset = reference_table::parse("44.0.1.0/24|1 2 3\n");
    const auto rep2 = evaluate_disagreement(engine, superset, parse_eval_queries("44.0.1.0/24 202001\n"));
    EXPECT_EQ(rep2.histogram.at({"1_2_3", "1_2"}), 1u);
}

TEST(Eval, UncomparableUnitsAreExcluded) {
    const auto engine = two_units();
    const auto ref = reference_table::parse("44.0.0.0/24|1\n45.0.0.0/24|9\n");
    const auto rep = evaluate_disagreement(
        engine, ref, parse_eval_queries("44.0.0.1 202001\n45.0.0.1 202001\n2a00::1 202001\n44.0.0.1 201901\n"));
    const auto& jan = rep.periods.at(period{2020, 1});
    EXPECT_EQ(jan.compared, 1u);
    EXPECT_EQ(jan.uncomparable, 2u); // 45/24 has no history, 2a00::/48 has no reference
    EXPECT_DOUBLE_EQ(jan.percent(), 0.0);
    const auto& old = rep.periods.at(period{2019, 1});
    EXPECT_EQ(old.compared, 0u);
    EXPECT_EQ(old.uncomparable, 1u);
    EXPECT_DOUBLE_EQ(old.percent(), 0.0);
}

TEST(Eval, QueriesCollapseToUnits) {
    const auto engine = two_units();
    const auto ref = reference_table::parse("2a00::/48|3\n");
    const auto rep = evaluate_disagreement(engine, ref,
                                           parse_eval_queries("2a00::1 202001\n2a00::ffff 20200115\n2a00::/48 202001\n"));
    EXPECT_EQ(rep.periods.at(period{2020, 1}).compared, 1u);
}

TEST(Eval, MovedUnitsBeforeAndAfter) {
    const auto f = moved_units();
    const auto ref = reference_table::parse(f.reference_text);
    ASSERT_EQ(ref.units.size(), 130u);
    const auto rep = evaluate_disagreement(f.engine, ref, parse_eval_queries(f.queries_text));
    const auto& jan = rep.periods.at(period{2020, 1});
    const auto& mar = rep.periods.at(period{2020, 3});
    EXPECT_EQ(jan.compared, 130u);
    EXPECT_EQ(jan.disagreeing, 10u);
    EXPECT_NEAR(jan.percent(), 100.0 * 10 / 130, 1e-9);
    EXPECT_EQ(mar.disagreeing, 0u);
    EXPECT_EQ(rep.histogram.at({"65", "64"}), 10u);
    EXPECT_EQ(rep.to_tsv(), "period\tcompared\tdisagreeing\tpercent\tuncomparable\n"
                            "202001\t130\t10\t7.69\t0\n"
                            "202003\t130\t0\t0.00\t0\n");
    EXPECT_EQ(rep.histogram_tsv(), "reference_asns\thistoric_asns\tunits\n65\t64\t10\n");
}

TEST(Eval, SelfComparisonIsZero) {
    const auto f = moved_units();
    std::string ref_text;
    for (const auto& q : parse_eval_queries(f.queries_text)) {
        if (q.when != period{2020, 3})
            continue;
        auto j = f.engine.lookup_joined(q.target.str(), joined_sample_days(q.when.first_day()));
        ref_text += q.target.str() + "|" + asn_set_text({j.asns.begin(), j.asns.end()}) + "\n";
    }
    const auto rep = evaluate_disagreement(f.engine, reference_table::parse(ref_text),
                                           parse_eval_queries(f.queries_text));
    EXPECT_EQ(rep.periods.at(period{2020, 3}).disagreeing, 0u);
}

TEST(Eval, HistogramSumsToDisagreements) {
    const auto f = moved_units();
    auto ref_text = f.reference_text + "44.0.20.0/24|7\n44.0.21.0/24|8\n";
    const auto rep = evaluate_disagreement(f.engine, reference_table::parse(ref_text),
                                           parse_eval_queries(f.queries_text));
    std::size_t disagreeing = 0, binned = 0;
    for (const auto& [p, s] : rep.periods) {
        disagreeing += s.disagreeing;
        EXPECT_GE(s.percent(), 0.0);
        EXPECT_LE(s.percent(), 100.0);
    }
    for (const auto& [k, n] : rep.histogram)
        binned += n;
    EXPECT_EQ(binned, disagreeing);
    EXPECT_EQ(disagreeing, 10u + 4u); // the two extra lines merge into units 20 and 21
}

TEST(Eval, ReferenceParsing) {
    const auto t = reference_table::parse("# comment\n"
                                          "1.2.3.4|AS13335\n"
                                          "1.2.3.0/24|15169,13335\n"
                                          "2001:db8::1 | 1_2\n"
                                          "junk\n"
                                          "5.6.7.8|notanasn\n"
                                          "9.9.9.9|\n");
    EXPECT_EQ(t.malformed, 3u);
    ASSERT_EQ(t.units.size(), 2u);
    EXPECT_EQ(t.units.at(*ip_prefix::parse("1.2.3.0/24")), (asn_set{13335, 15169}));
    EXPECT_EQ(t.units.at(*ip_prefix::parse("2001:db8::/48")), (asn_set{1, 2}));
}

TEST(Eval, QueryParsing) {
    std::size_t bad = 0;
    const auto q = parse_eval_queries("1.1.1.1 202001\n1.1.1.1 20200131\n1.1.1.1 202013\nnope 202001\n1.1.1.1\n", &bad);
    EXPECT_EQ(q.size(), 2u);
    EXPECT_EQ(bad, 3u);
    EXPECT_EQ(q[1].when, (period{2020, 1}));
}
