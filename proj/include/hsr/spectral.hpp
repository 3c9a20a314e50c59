#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hsr {

// s-band spectral cube, band-major [s x h x w], reflectance-like values.
struct HSImage {
  int bands = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;         // bands*height*width, band-major
  std::vector<double> wavelengths;  // nm, strictly increasing, length bands

  HSImage() = default;
  HSImage(int s, int h, int w);

  double& at(int band, int y, int x);
  double at(int band, int y, int x) const;
  std::int64_t pixels() const { return static_cast<std::int64_t>(height) * width; }

  static std::vector<double> default_wavelengths(int s);  // 400..700 nm
};

struct RGBImage {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // 3*height*width, channel-major R,G,B

  RGBImage() = default;
  RGBImage(int h, int w);

  double& at(int ch, int y, int x);
  double at(int ch, int y, int x) const;
  std::int64_t pixels() const { return static_cast<std::int64_t>(height) * width; }
};

// Camera spectral response: rows R,G,B over the band axis.
struct SRF {
  std::string name;
  int bands = 0;
  std::vector<double> matrix;  // 3*bands, row-major

  SRF() = default;
  SRF(std::string name, int bands);

  double& at(int channel, int band);
  double at(int channel, int band) const;
};

enum class NoiseKind { none, gaussian };

struct NoiseModel {
  NoiseKind kind = NoiseKind::none;
  double sigma = 0.0;  // per-channel standard deviation
  std::uint64_t seed = 0;

  static NoiseModel none() { return {}; }
  static NoiseModel gaussian(double sigma, std::uint64_t seed);
};

// X = C.Y + N, flattening the spatial dimensions. Output is not clamped;
// [0,1] clamping happens only when files are written.
RGBImage apply_degradation(const HSImage& y, const SRF& c, const NoiseModel& n);

// Gray World: rescale each channel so all three channel means equal the
// global mean of the input.
RGBImage gray_world_balance(const RGBImage& x);

// 10*log10(peak^2 / MSE) over the whole cube, capped at 100 dB.
double psnr(const HSImage& a, const HSImage& b, double peak = 1.0);

// Mean over bands of per-band SSIM (11x11 Gaussian window, sigma 1.5,
// C1=(0.01 L)^2, C2=(0.03 L)^2). Windows fully inside the image.
struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};
double assim(const HSImage& a, const HSImage& b, const SsimParams& params = {});

// Mean spectral angle in degrees; pixels whose spectrum is all-zero in
// either cube are skipped and counted.
double sam(const HSImage& a, const HSImage& b, int* skipped_pixels = nullptr);

// Bicubic interpolation over the spectral dimension: per pixel, the B,G,R
// values are resampled to s bands with the Keys cubic kernel (a = -0.5).
HSImage spectral_bicubic(const RGBImage& x, int bands);

}  // namespace hsr
