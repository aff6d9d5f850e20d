#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <set>

#include "riscom/codebook.hpp"
#include "riscom/ris.hpp"
#include "riscom/rng.hpp"

using namespace riscom;

TEST_CASE("steering vector basics", "[ris]") {
  const RisGeometry g{15, 15, 0.5};
  const Eigen::VectorXcd broadside = steering_vector(g, {0.0, 0.0});
  CHECK((broadside - Eigen::VectorXcd::Ones(g.size())).cwiseAbs().maxCoeff() <= 1e-12);

  const RisGeometry line{1, 2, 0.5};
  const Eigen::VectorXcd v = steering_vector(line, {90.0, 0.0});
  CHECK_THAT(v(0).real(), Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(v(1).real(), Catch::Matchers::WithinAbs(-1.0, 1e-12));

  RngStream rng(3, Stream::noise, 0);
  for (int i = 0; i < 20; ++i) {
    const Direction d{rng.uniform(-90.0, 90.0), rng.uniform(-90.0, 90.0)};
    const Eigen::VectorXcd s = steering_vector(g, d);
    for (int m = 0; m < g.size(); ++m) CHECK(std::abs(std::abs(s(m)) - 1.0) <= 1e-12);
  }
  CHECK_THROWS_AS(steering_vector(g, {120.0, 0.0}), std::invalid_argument);
}

TEST_CASE("square partition tiles the grid", "[ris]") {
  const RisGeometry g{15, 15, 0.5};
  const SubarrayPartition part = square_partition(g, 3);
  REQUIRE(part.n_subarrays() == 9);
  std::set<int> all;
  for (const auto& ids : part.membership) {
    CHECK(ids.size() == 25);
    all.insert(ids.begin(), ids.end());
  }
  CHECK(all.size() == 225);
  CHECK(*all.begin() == 0);
  CHECK(*all.rbegin() == 224);

  const RisGeometry g2{2, 2, 0.5};
  const SubarrayPartition p2 = square_partition(g2, 2);
  REQUIRE(p2.n_subarrays() == 4);
  for (const auto& ids : p2.membership) CHECK(ids.size() == 1);

  CHECK_THROWS_AS(square_partition(g, 4), std::invalid_argument);
}

TEST_CASE("matched beamformers restrict the product steering vector", "[ris]") {
  const RisGeometry g{15, 15, 0.5};
  const SubarrayPartition part = square_partition(g, 3);

  const BeamformerSet bcast = matched_beamformers(part, g, {0.0, 0.0}, {0.0, 0.0});
  for (const auto& b : bcast.vectors)
    CHECK((b - Eigen::VectorXcd::Ones(b.size())).cwiseAbs().maxCoeff() <= 1e-12);

  const BeamformerSet bf = matched_beamformers(part, g, {-45.0, 0.0}, {45.0, 0.0});
  for (const auto& b : bf.vectors)
    for (int j = 0; j < b.size(); ++j) CHECK(std::abs(std::abs(b(j)) - 1.0) <= 1e-12);
}

TEST_CASE("space-time code columns follow the encoding rule", "[ris]") {
  const RisGeometry g{2, 2, 0.5};
  const SubarrayPartition part = square_partition(g, 1);  // single subarray of 4 elements
  const Codebook cb = build_codebook(6);
  const BeamformerSet ones{{Eigen::VectorXcd::Ones(4)}};

  const SpaceTimeCode code = space_time_code(cb, {{1}}, {0}, part, ones);
  for (int m = 0; m < 4; ++m)
    CHECK((code.matrix.col(m) - cb.codeword(1)).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("space-time code is unit modulus and matches the sum form", "[ris]") {
  const RisGeometry g{4, 4, 0.5};
  const SubarrayPartition part = square_partition(g, 2);
  const Codebook cb = build_codebook(9);
  const BeamformerSet bf = matched_beamformers(part, g, {-30.0, 10.0}, {20.0, -5.0});
  const MessageSubset subset{{2, 3, 5, 8}};
  const std::vector<int> order{2, 0, 3, 1};

  const SpaceTimeCode code = space_time_code(cb, subset, order, part, bf);
  for (int m = 0; m < g.size(); ++m)
    for (int l = 0; l < cb.length_l; ++l)
      CHECK(std::abs(std::abs(code.matrix(l, m)) - 1.0) <= 1e-12);

  // reconstruct X = sum_n c_n (P_n b_n)^H
  Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(cb.length_l, g.size());
  for (int n = 0; n < part.n_subarrays(); ++n) {
    Eigen::VectorXcd pb = Eigen::VectorXcd::Zero(g.size());
    for (std::size_t j = 0; j < part.membership[n].size(); ++j)
      pb(part.membership[n][j]) = bf.vectors[n](static_cast<int>(j));
    x += cb.codeword(subset.indices[order[n]]) * pb.adjoint();
  }
  CHECK((x - code.matrix).cwiseAbs().maxCoeff() == 0.0);

  // matched filtering X against codewords: active collapse to L * conj(P_n b_n)
  for (int n = 0; n < part.n_subarrays(); ++n) {
    const int cw = code.assignment[n];
    const Eigen::VectorXcd proj = code.matrix.adjoint() * cb.codeword(cw);
    Eigen::VectorXcd want = Eigen::VectorXcd::Zero(g.size());
    for (std::size_t j = 0; j < part.membership[n].size(); ++j)
      want(part.membership[n][j]) = bf.vectors[n](static_cast<int>(j));
    CHECK((proj - static_cast<double>(cb.length_l) * want).cwiseAbs().maxCoeff() <= 1e-9);
  }
  for (int cw = 1; cw < cb.length_l; ++cw) {
    if (std::find(code.assignment.begin(), code.assignment.end(), cw) != code.assignment.end())
      continue;
    CHECK((code.matrix.adjoint() * cb.codeword(cw)).cwiseAbs().maxCoeff() <= 1e-9);
  }

  CHECK_THROWS_AS(space_time_code(cb, subset, {0, 0, 1, 2}, part, bf), std::invalid_argument);
  CHECK_THROWS_AS(space_time_code(cb, {{1, 2}}, {0, 1}, part, bf), std::invalid_argument);
}

TEST_CASE("beampattern closed form matches the explicit code route", "[ris]") {
  const RisGeometry g{15, 15, 0.5};
  const SubarrayPartition part = square_partition(g, 3);
  const Direction theta_st{-45.0, 0.0}, theta_bar{45.0, 0.0};
  const BeamformerSet bf = matched_beamformers(part, g, theta_st, theta_bar);
  const int length_l = 21;
  const Codebook cb = build_codebook(length_l);
  const Eigen::VectorXcd gamma = steering_vector(g, theta_st);  // unit sigma, zero phase

  // B(theta_bar) = L * N * M^2
  const double b_target = beampattern_closed(bf, part, g, gamma, theta_bar, length_l);
  CHECK_THAT(b_target, Catch::Matchers::WithinRel(118125.0, 1e-12));

  RngStream rng(99, Stream::message, 1);
  SubsetCodec codec(length_l, 9);
  std::vector<Direction> dirs;
  for (double az = -90.0; az <= 90.0; az += 30.0)
    for (double el = -30.0; el <= 30.0; el += 15.0) dirs.push_back({az, el});

  for (int rep = 0; rep < 3; ++rep) {
    const MessageSubset subset = codec.unrank(BigInt(rng.next_u64() % 167960));
    std::vector<int> order = identity_assignment(9);
    for (int i = 8; i > 0; --i) std::swap(order[i], order[rng.next_u64() % (i + 1)]);
    const SpaceTimeCode code = space_time_code(cb, subset, order, part, bf);
    for (const Direction& d : dirs) {
      const double closed = beampattern_closed(bf, part, g, gamma, d, length_l);
      const double explicit_b = beampattern_explicit(code, g, gamma, d);
      CHECK_THAT(explicit_b, Catch::Matchers::WithinRel(closed, 1e-9));
    }
  }

  // zero channel radiates nothing
  const Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(g.size());
  CHECK(beampattern_closed(bf, part, g, zero, theta_bar, length_l) == 0.0);
}
