#ifndef SACNET_DATA_HPP_
#define SACNET_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sacnet/tensor.hpp"

namespace sacnet {

struct Sample {
  Tensor image;  // (1, 3, H, W) in [0, 1]
  Tensor mask;   // (1, 1, H, W) in {0, 1}
  std::string id;
};

// Binary PPM (P6) and PGM (P5) with maxval 255. Header comments are
// allowed. Errors raise DataError naming the file.
Tensor load_image(const std::filesystem::path& path);
// PGM scaled to [0, 1] without thresholding (saliency maps).
Tensor load_gray(const std::filesystem::path& path);
// PGM binarized at 128.
Tensor load_mask(const std::filesystem::path& path);

// Values are clamped to [0, 1] and stored as round(255 * v).
void save_image(const std::filesystem::path& path, const Tensor& image);
void save_gray(const std::filesystem::path& path, const Tensor& map);

// Parsers for in-memory files; used by the loaders above.
Tensor decode_pnm(const std::string& bytes, int channels,
                  const std::string& origin);

struct SynthConfig {
  int size = 64;
  int count = 250;
  uint64_t seed = 0;
  int max_shapes = 3;
  // Noise octaves of the background texture; octave o uses a (2^(o+1)+1)^2
  // lattice.
  int octaves = 3;
  double texture_amplitude = 0.15;
  // Euclidean RGB distance between the foreground and background mean
  // colors, drawn uniformly per image.
  double min_contrast = 0.2;
  double max_contrast = 0.3;
  double min_fraction = 0.02;
  double max_fraction = 0.6;

  void validate() const;
};

// Sample i depends only on (seed, i), so datasets of different sizes share
// their prefixes.
Sample synth_sample(const SynthConfig& cfg, int index);
std::vector<Sample> synth_dataset(const SynthConfig& cfg);

// Layout: root/images/<id>.ppm, root/masks/<id>.pgm, root/index.txt with
// one id per line.
void save_dataset(const std::filesystem::path& root,
                  const std::vector<Sample>& samples);
std::vector<Sample> load_dataset(const std::filesystem::path& root);

}  // namespace sacnet

#endif  // SACNET_DATA_HPP_
