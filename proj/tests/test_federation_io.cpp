#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "persfl/federation_io.hpp"

namespace {

using namespace persfl;
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("persfl_io_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.n_devices = 4;
  s.samples_per_device = 3;
  s.dim = 2;
  s.noise_std = 0.25;
  s.cluster_sizes = {2, 2};
  s.seed = 7;
  return s;
}

TEST(FederationIo, RoundTripIsExact) {
  const auto fed = generate_federation(small_spec());
  const auto dir = scratch("roundtrip");
  write_federation(fed, dir);
  const auto back = read_federation(dir);
  ASSERT_EQ(back.size(), fed.size());
  for (std::size_t i = 0; i < fed.size(); ++i) {
    EXPECT_EQ(back.datasets[i].features, fed.datasets[i].features);
    EXPECT_EQ(back.datasets[i].labels, fed.datasets[i].labels);
  }
  EXPECT_EQ(back.truth.device_to_cluster, fed.truth.device_to_cluster);
  EXPECT_EQ(back.truth.cluster_params[1], fed.truth.cluster_params[1]);
  EXPECT_EQ(back.spec.seed, 7u);
  EXPECT_EQ(back.spec.noise_std, 0.25);
  fs::remove_all(dir);
}

TEST(FederationIo, SameSeedGivesSameBytes) {
  const auto a = scratch("bytes_a"), b = scratch("bytes_b");
  write_federation(generate_federation(small_spec()), a);
  write_federation(generate_federation(small_spec()), b);
  EXPECT_EQ(slurp(a / "manifest.txt"), slurp(b / "manifest.txt"));
  for (int i = 0; i < 4; ++i) {
    const std::string f = "device_000" + std::to_string(i) + ".csv";
    EXPECT_EQ(slurp(a / f), slurp(b / f));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(FederationIo, ManifestIsKeyValue) {
  const auto dir = scratch("manifest");
  write_federation(generate_federation(small_spec()), dir);
  const auto text = slurp(dir / "manifest.txt");
  EXPECT_NE(text.find("n_devices = 4\n"), std::string::npos);
  EXPECT_NE(text.find("cluster_sizes = 2,2\n"), std::string::npos);
  EXPECT_NE(text.find("device_to_cluster = 0,0,1,1\n"), std::string::npos);
  EXPECT_EQ(slurp(dir / "device_0000.csv").substr(0, 8), "x0,x1,y\n");
  fs::remove_all(dir);
}

TEST(FederationIo, MissingDirectoryIsConfigError) {
  EXPECT_THROW(read_federation(scratch("absent")), ConfigError);
}

}  // namespace
