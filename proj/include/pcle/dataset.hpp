#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pcle/degrade.hpp"
#include "pcle/geometry.hpp"
#include "pcle/image.hpp"

namespace pcle {

/// Histology-like procedural texture in [0, 1]: smooth multi-scale background,
/// soft elliptical cells with darker nuclei and thin curved strands.
CartesianImage procedural_texture(int width, int height, std::uint64_t seed);

struct VideoSpec {
  int size = 128;                 // frame side
  int frames = 20;
  double pixels_per_fibre = 7.0;
  double jitter = 0.2;            // fibre jitter as a fraction of the spacing
  double pan_speed = 1.5;         // pixels per frame
  NoiseParams noise;

  void validate() const;
};

/// A synthetic pCLE video: a texture panned under one fibre bundle.
struct SyntheticVideo {
  std::string name;
  FibrePattern pattern;             // fitted to the frame grid
  std::vector<CartesianImage> hr;   // ground truth, masked to the reconstruction FoV
  std::vector<CartesianImage> lr;   // simulated pCLE frames
  std::vector<std::uint64_t> noise_seeds;
};

/// Simulates every frame of a panned texture from `source`, which must be at
/// least spec.size + pan extent on each side (see video_source_side).
SyntheticVideo make_synthetic_video(const CartesianImage& source, const VideoSpec& spec, std::uint64_t seed,
                                    const std::string& name);
/// Same, with a procedural texture of the required size.
SyntheticVideo make_synthetic_video(const VideoSpec& spec, std::uint64_t seed, const std::string& name);

/// Directory layout: pattern.json, mask.png, video.json (name, noise seeds),
/// lr/frame_NNNN.png and hr/frame_NNNN.png (16-bit).
void save_video(const std::filesystem::path& dir, const SyntheticVideo& video);
/// Reads a directory written by save_video; hr/ is optional. The stored mask is
/// applied to every frame.
SyntheticVideo load_video(const std::filesystem::path& dir);
bool is_video_dir(const std::filesystem::path& dir);
std::string frame_file_name(std::size_t index);

/// Smallest square source side that fits the panned frames.
int video_source_side(const VideoSpec& spec);

}  // namespace pcle
