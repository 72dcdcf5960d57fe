#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "moss/dataset.hpp"

using namespace moss;

namespace {

struct TempCsv {
  std::string path;
  explicit TempCsv(const std::string& content, const std::string& name) : path(name) {
    std::ofstream out(path);
    out << content;
  }
  ~TempCsv() { std::remove(path.c_str()); }
};

CsvSchema schema_w1() {
  CsvSchema s;
  s.covariate_cols = {"w1"};
  return s;
}

}  // namespace

TEST_CASE("load_csv reads times, events and covariates back") {
  TempCsv file("time,event,a,w1\n2,1,0,0.5\n5,0,1,1.25\n3,1,1,-0.75\n", "t_load.csv");
  SurvivalDataset ds = load_csv(file.path, schema_w1());
  CHECK(ds.n() == 3);
  CHECK(ds.t_max == 5);
  CHECK(ds.dropped_rows == 0);
  CHECK(ds.observations[1].a == 1);
  CHECK(ds.observations[2].w[0] == doctest::Approx(-0.75));
}

TEST_CASE("missing values drop the row and count it") {
  TempCsv file("time,event,a,w1\n2,1,0,0.5\n5,0,1,\n3,1,1,NA\n", "t_missing.csv");
  SurvivalDataset ds = load_csv(file.path, schema_w1());
  CHECK(ds.n() == 1);
  CHECK(ds.dropped_rows == 2);
}

TEST_CASE("non-binary treatment is a schema error") {
  TempCsv file("time,event,a,w1\n2,1,2,0.5\n", "t_badtreat.csv");
  CHECK_THROWS_AS(load_csv(file.path, schema_w1()), data_error);
}

TEST_CASE("empty dataset is an error") {
  TempCsv file("time,event,a,w1\n", "t_empty.csv");
  CHECK_THROWS_AS(load_csv(file.path, schema_w1()), data_error);
}

TEST_CASE("malformed rows report the line number") {
  TempCsv file("time,event,a,w1\n2,1,0,0.5\nfoo,1,0,0.5\n", "t_malformed.csv");
  try {
    load_csv(file.path, schema_w1());
    FAIL("expected data_error");
  } catch (const data_error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("non-integer times require the declared discretizer") {
  TempCsv file("time,event,a,w1\n2.4,1,0,0.5\n", "t_real.csv");
  CHECK_THROWS_AS(load_csv(file.path, schema_w1()), data_error);
  CsvSchema s = schema_w1();
  s.discretize_ceil = true;
  SurvivalDataset ds = load_csv(file.path, s);
  CHECK(ds.observations[0].t_tilde == 3);
}

TEST_CASE("preprocess truncates to censoring then rescales by ceil") {
  SurvivalDataset ds;
  ds.covariate_names = {};
  ds.observations = {{1, {}, 1, 170, 1}, {2, {}, 0, 40, 0}};
  ds.t_max = 170;

  SurvivalDataset truncated = preprocess(ds, 160, 1);
  CHECK(truncated.observations[0].t_tilde == 160);
  CHECK(truncated.observations[0].delta == 0);
  CHECK(truncated.observations[1].t_tilde == 40);
  CHECK(truncated.observations[1].delta == 0);

  SurvivalDataset rescaled = preprocess(ds, 160, 20);
  CHECK(rescaled.observations[0].t_tilde == 8);  // ceil(160/20)
  CHECK(rescaled.observations[1].t_tilde == 2);  // ceil(40/20)
  CHECK(rescaled.t_max == 8);

  SurvivalDataset unchanged = preprocess(ds, std::nullopt, 1);
  CHECK(unchanged.observations[0].t_tilde == 170);
  CHECK(unchanged.observations[0].delta == 1);
}

TEST_CASE("preprocess applied twice with the same arguments is a no-op") {
  SurvivalDataset ds;
  ds.observations = {{1, {}, 1, 170, 1}, {2, {}, 0, 33, 1}};
  ds.t_max = 170;
  SurvivalDataset once = preprocess(ds, 160, 20);
  SurvivalDataset twice = preprocess(once, 160, 20);
  REQUIRE(once.n() == twice.n());
  for (int i = 0; i < once.n(); ++i) {
    CHECK(once.observations[i].t_tilde == twice.observations[i].t_tilde);
    CHECK(once.observations[i].delta == twice.observations[i].delta);
  }
  CHECK(once.t_max == twice.t_max);
}

TEST_CASE("to_long expands failure and censoring indicators") {
  SurvivalDataset ds;
  ds.observations = {{1, {}, 1, 3, 1}, {2, {}, 0, 2, 0}, {3, {}, 1, 1, 1}};
  ds.t_max = 3;
  std::vector<LongRow> rows = to_long(ds);
  REQUIRE(rows.size() == 6);  // 3 + 2 + 1

  CHECK(rows[0].dN == 0);
  CHECK(rows[1].dN == 0);
  CHECK(rows[2].dN == 1);
  CHECK(rows[2].dAc == 0);

  CHECK(rows[3].dAc == 0);
  CHECK(rows[4].dAc == 1);
  CHECK(rows[4].dN == 0);

  CHECK(rows[5].k == 1);
  CHECK(rows[5].dN == 1);

  for (const auto& r : rows) {
    CHECK(r.at_risk == 1);
    CHECK(r.dN * r.dAc == 0);
  }
}

TEST_CASE("long rows round-trip terminal state for every subject") {
  SurvivalDataset ds;
  int id = 1;
  for (int t = 1; t <= 6; ++t)
    for (int delta : {0, 1})
      for (int a : {0, 1}) ds.observations.push_back({id++, {}, a, t, delta});
  ds.t_max = 6;

  std::vector<LongRow> rows = to_long(ds);
  std::size_t expected = 0;
  for (const auto& o : ds.observations) expected += o.t_tilde;
  CHECK(rows.size() == expected);

  for (const auto& o : ds.observations) {
    int last_k = 0, last_dN = -1, last_dAc = -1;
    for (const auto& r : rows) {
      if (r.id != o.id) continue;
      CHECK(r.k <= o.t_tilde);
      if (r.k > last_k) {
        last_k = r.k;
        last_dN = r.dN;
        last_dAc = r.dAc;
      }
    }
    CHECK(last_k == o.t_tilde);
    CHECK(last_dN == (o.delta == 1 ? 1 : 0));
    CHECK(last_dAc == (o.delta == 0 ? 1 : 0));
  }
}

TEST_CASE("long-format export carries the id,k,dN,dAc,a,w columns") {
  SurvivalDataset ds;
  ds.covariate_names = {"w1", "w2"};
  ds.observations = {{7, {0.5, -1.0}, 1, 2, 1}, {9, {0.1, 0.2}, 0, 1, 0}};
  ds.t_max = 2;
  write_long_csv("t_long_export.csv", ds);
  std::ifstream in("t_long_export.csv");
  std::string header, row1, row2, row3;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  std::getline(in, row3);
  CHECK(header == "id,k,dN,dAc,a,w1,w2");
  CHECK(row1 == "7,1,0,0,1,0.5,-1");
  CHECK(row2 == "7,2,1,0,1,0.5,-1");
  CHECK(row3 == "9,1,0,1,0,0.1,0.2");
  std::remove("t_long_export.csv");
}
