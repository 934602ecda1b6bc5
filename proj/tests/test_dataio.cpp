#include <catch_amalgamated.hpp>

#include <algorithm>
#include <clocale>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "gomea/dataio.hpp"
#include "gomea/fitness.hpp"

using namespace gomea;

TEST_CASE("csv parsing")
{
    std::string text = "a,b,y\n";
    for (int r = 0; r < 12; ++r) text += std::to_string(r) + "," + std::to_string(r * 0.5) + "," + std::to_string(r * r) + "\n";
    const auto d = parse_csv(text);
    CHECK(d.rows() == 12);
    CHECK(d.features() == 2);
    CHECK(d.feature_names == std::vector<std::string>{"a", "b"});
    CHECK(d.x(3, 1) == 1.5);
    CHECK(d.y[5] == 25.0);

    const auto by_name = parse_csv(text, CsvOptions{"a", {}, {}});
    CHECK(by_name.feature_names == std::vector<std::string>{"b", "y"});
    CHECK(by_name.y[4] == 4.0);
    const auto by_index = parse_csv(text, CsvOptions{"1", {}, {}});
    CHECK(by_index.feature_names == std::vector<std::string>{"a", "y"});
    const auto dropped = parse_csv(text, CsvOptions{"", {"b"}, {}});
    CHECK(dropped.feature_names == std::vector<std::string>{"a"});

    const auto bom = parse_csv("\xEF\xBB\xBF" + text);
    CHECK(bom.feature_names.front() == "a");
    const auto crlf = parse_csv("a,y\r\n1,1\r\n2,4\r\n3,9\r\n4,1\r\n5,2\r\n6,3\r\n7,3\r\n8,0\r\n9,1\r\n10,5\r\n");
    CHECK(crlf.rows() == 10);
}

TEST_CASE("csv errors name the cell")
{
    std::string text = "a,y\n";
    for (int r = 0; r < 11; ++r) text += "1," + std::to_string(r) + "\n";
    auto bad = text;
    bad.replace(bad.find("1,3"), 3, "1,NaN");
    try {
        parse_csv(bad);
        FAIL("expected a DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 5") != std::string::npos);
        CHECK(msg.find("'y'") != std::string::npos);
    }
    auto word = text;
    word.replace(word.find("1,5"), 3, "x1,5");
    CHECK_THROWS_AS(parse_csv(word), DataError);
    CHECK_THROWS_AS(parse_csv("a,y\n1,2\n2,3\n"), DataError);
    std::string flat = "a,y\n";
    for (int r = 0; r < 11; ++r) flat += std::to_string(r) + ",7\n";
    CHECK_THROWS_AS(parse_csv(flat), DataError);
    CHECK_THROWS_AS(parse_csv(text, CsvOptions{"missing", {}, {}}), DataError);
    CHECK_THROWS_AS(parse_csv("a,y\n1,2,3\n"), DataError);
    CHECK_THROWS_AS(load_csv("/nonexistent/file.csv"), DataError);
}

TEST_CASE("csv parsing ignores the locale")
{
    const char* old = std::setlocale(LC_NUMERIC, nullptr);
    const std::string saved = old ? old : "C";
    std::setlocale(LC_NUMERIC, "de_DE.UTF-8");
    std::string text = "a,y\n";
    for (int r = 0; r < 10; ++r) text += std::to_string(r) + ".25,1." + std::to_string(r) + "\n";
    const auto d = parse_csv(text);
    CHECK(d.x(2, 0) == 2.25);
    std::setlocale(LC_NUMERIC, saved.c_str());
}

TEST_CASE("bike sharing transform")
{
    CHECK(day_of_year("2011-01-01") == 1);
    CHECK(day_of_year("2011-12-31") == 365);
    CHECK(day_of_year("2012-12-31") == 366);
    CHECK(day_of_year("2012-03-01") == 61);
    CHECK_THROWS_AS(day_of_year("2011-13-01"), DataError);

    std::string text = "instant,dteday,season,temp,casual,registered,cnt\n";
    for (int r = 0; r < 12; ++r) {
        text += std::to_string(r + 1) + ",2011-02-" + (r + 1 < 10 ? "0" : "") + std::to_string(r + 1) + ",1,0." +
                std::to_string(r) + ",3,4," + std::to_string(100 + r * 7) + "\n";
    }
    const auto d = parse_csv(text, bike_sharing_options());
    CHECK(d.feature_names == std::vector<std::string>{"dteday", "season", "temp"});
    CHECK(d.x(0, 0) == 32.0);
    CHECK(d.y[2] == 114.0);
}

TEST_CASE("csv file loading")
{
    const auto dir = std::filesystem::temp_directory_path() / "gomea_dataio_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "small.csv";
    {
        std::ofstream out(path);
        out << "f0,f1,target\n";
        for (int r = 0; r < 20; ++r) out << r << "," << -r << "," << r % 3 << "\n";
    }
    const auto d = load_csv(path);
    CHECK(d.rows() == 20);
    CHECK(d.provenance == "small.csv");
    std::filesystem::remove_all(dir);
}

TEST_CASE("split plan")
{
    const auto splits = make_splits(100, SplitPlan{});
    REQUIRE(splits.size() == 30);
    const auto& test = splits.front().test;
    CHECK(test.size() == 25);
    std::set<std::size_t> test_set(test.begin(), test.end());

    for (int rep = 0; rep < 6; ++rep) {
        std::set<std::size_t> validation_union;
        for (int fold = 0; fold < 5; ++fold) {
            const auto& s = splits[static_cast<std::size_t>(rep * 5 + fold)];
            CHECK(s.repeat == rep);
            CHECK(s.fold == fold);
            CHECK(s.test == test);
            CHECK(s.train.size() == 60);
            CHECK(s.validation.size() == 15);
            std::set<std::size_t> all(s.train.begin(), s.train.end());
            all.insert(s.validation.begin(), s.validation.end());
            all.insert(s.test.begin(), s.test.end());
            CHECK(all.size() == 100);
            validation_union.insert(s.validation.begin(), s.validation.end());
        }
        CHECK(validation_union.size() == 75);
        for (auto v : validation_union) CHECK(test_set.count(v) == 0);
    }

    const auto again = make_splits(100, SplitPlan{});
    for (std::size_t k = 0; k < 30; ++k) {
        CHECK(again[k].train == splits[k].train);
        CHECK(again[k].run_seed == splits[k].run_seed);
        CHECK(splits[k].run_seed == run_seed(0, static_cast<int>(k)));
    }
    const auto other = make_splits(100, SplitPlan{0.25, 5, 6, 7});
    CHECK(other[0].test != splits[0].test);

    // Fold sizes differ by at most one.
    const auto odd = make_splits(103, SplitPlan{});
    CHECK(odd[0].test.size() == 25);
    std::size_t lo = 1000, hi = 0;
    for (int fold = 0; fold < 5; ++fold) {
        lo = std::min(lo, odd[static_cast<std::size_t>(fold)].validation.size());
        hi = std::max(hi, odd[static_cast<std::size_t>(fold)].validation.size());
    }
    CHECK(hi - lo <= 1);
}

TEST_CASE("synthetic problems")
{
    const auto a = synth_problem("sin_plus_sqrt", 200, 0.0, 1);
    const auto b = synth_problem("sin_plus_sqrt", 200, 0.0, 1);
    CHECK(a.x.column(0)[7] == b.x.column(0)[7]);
    CHECK(a.y == b.y);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        CHECK(a.y[r] == std::sin(a.x(r, 0)) + std::sqrt(std::fabs(a.x(r, 1))));
    }
    CHECK_NOTHROW(validate_dataset(a));

    const auto noisy = synth_problem("sin_plus_sqrt", 200, 0.1, 1);
    CHECK(r2(a.y, noisy.y) < 1.0);

    const auto air = synth_problem("airfoil_like", 1503, 0.0, 1);
    CHECK(air.rows() == 1503);
    CHECK(air.features() == 5);
    CHECK_NOTHROW(synth_problem("pagie", 50, 0.0, 1));
    CHECK_THROWS_AS(synth_problem("nope", 50, 0.0, 1), DataError);
    CHECK(synthetic_problem_names().size() == 3);
}

TEST_CASE("dataset subset")
{
    const auto d = synth_problem("pagie", 30, 0.0, 2);
    const std::vector<std::size_t> rows{4, 2, 9};
    const auto s = d.subset(rows);
    CHECK(s.rows() == 3);
    CHECK(s.y[1] == d.y[2]);
    CHECK(s.x(2, 1) == d.x(9, 1));
    CHECK(s.feature_names == d.feature_names);
}
