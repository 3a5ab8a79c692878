#include "helpers.hpp"
#include "resgp/error.hpp"
#include "resgp/io.hpp"

#include <doctest.h>

#include <string>

using namespace resgp;

TEST_CASE("CSV errors name the offending line") {
    try {
        parse_csv("x1,y1,fidelity\n0.1,1,1\n0.2,abc,1\n");
        FAIL("expected a data error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    try {
        parse_csv("x1,y1,fidelity\n0.1,1\n");
        FAIL("expected a data error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_csv(""), DataError);
    CHECK_THROWS_AS(parse_csv("x1\nnan\n"), DataError);
}

TEST_CASE("dataset CSV round trip") {
    std::mt19937_64 rng(50);
    MultiFidelityData d;
    Eigen::MatrixXd x = testing::uniform_rows(rng, 7, 3);
    d.levels.push_back({x, testing::normal_matrix(rng, 7, 2)});
    d.levels.push_back({x.topRows(3), testing::normal_matrix(rng, 3, 2)});
    MultiFidelityData back = dataset_from_csv(parse_csv(dataset_to_csv(d)));
    REQUIRE(back.levels.size() == 2);
    for (std::size_t f = 0; f < 2; ++f) {
        CHECK(back.levels[f].inputs == d.levels[f].inputs);
        CHECK(back.levels[f].outputs == d.levels[f].outputs);
    }
}

TEST_CASE("dataset CSV column conventions") {
    CHECK_THROWS_AS(dataset_from_csv(parse_csv("x1,y1\n0,1\n")), DataError);
    CHECK_THROWS_AS(dataset_from_csv(parse_csv("x1,x3,y1,fidelity\n0,0,1,1\n")), DataError);
    CHECK_THROWS_AS(dataset_from_csv(parse_csv("x1,y1,fidelity\n0,1,1.5\n")), DataError);
    MultiFidelityData d = dataset_from_csv(parse_csv("fidelity,y1,x1\n2,5,0.5\n1,4,0.5\n1,3,0.1\n"));
    CHECK(d.levels[0].inputs.rows() == 2);
    CHECK(d.levels[1].outputs(0, 0) == 5.0);
}

TEST_CASE("query CSV dimension checks") {
    CsvTable t = parse_csv("x1,x2,extra\n0.1,0.2,9\n");
    CHECK(inputs_from_csv(t, 2).isApprox((Eigen::MatrixXd(1, 2) << 0.1, 0.2).finished()));
    CHECK_THROWS_AS(inputs_from_csv(t, 3), DimensionError);
    CHECK_THROWS_AS(inputs_from_csv(t, 1), DimensionError);
    CHECK(inputs_from_csv(parse_csv("x1\n"), 1).rows() == 0);
}
