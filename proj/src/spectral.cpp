#include "hsr/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hsr/rng.hpp"

namespace hsr {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void check_same_shape(const HSImage& a, const HSImage& b, const char* what) {
  if (a.bands != b.bands || a.height != b.height || a.width != b.width)
    fail(std::string(what) + ": cube shapes differ, [" + std::to_string(a.bands) + "x" +
         std::to_string(a.height) + "x" + std::to_string(a.width) + "] vs [" +
         std::to_string(b.bands) + "x" + std::to_string(b.height) + "x" +
         std::to_string(b.width) + "]");
}

}  // namespace

HSImage::HSImage(int s, int h, int w)
    : bands(s),
      height(h),
      width(w),
      data(static_cast<size_t>(s) * h * w, 0.0),
      wavelengths(default_wavelengths(s)) {}

double& HSImage::at(int band, int y, int x) {
  return data[(static_cast<size_t>(band) * height + y) * width + x];
}

double HSImage::at(int band, int y, int x) const {
  return data[(static_cast<size_t>(band) * height + y) * width + x];
}

std::vector<double> HSImage::default_wavelengths(int s) {
  std::vector<double> wl(static_cast<size_t>(s));
  if (s == 1) {
    wl[0] = 550.0;
    return wl;
  }
  for (int i = 0; i < s; ++i) wl[i] = 400.0 + 300.0 * i / (s - 1);
  return wl;
}

RGBImage::RGBImage(int h, int w)
    : height(h), width(w), data(static_cast<size_t>(3) * h * w, 0.0) {}

double& RGBImage::at(int ch, int y, int x) {
  return data[(static_cast<size_t>(ch) * height + y) * width + x];
}

double RGBImage::at(int ch, int y, int x) const {
  return data[(static_cast<size_t>(ch) * height + y) * width + x];
}

SRF::SRF(std::string name_, int bands_)
    : name(std::move(name_)), bands(bands_), matrix(static_cast<size_t>(3) * bands_, 0.0) {}

double& SRF::at(int channel, int band) {
  return matrix[static_cast<size_t>(channel) * bands + band];
}

double SRF::at(int channel, int band) const {
  return matrix[static_cast<size_t>(channel) * bands + band];
}

NoiseModel NoiseModel::gaussian(double sigma, std::uint64_t seed) {
  if (sigma <= 0.0) fail("NoiseModel::gaussian: sigma must be positive");
  NoiseModel n;
  n.kind = NoiseKind::gaussian;
  n.sigma = sigma;
  n.seed = seed;
  return n;
}

RGBImage apply_degradation(const HSImage& y, const SRF& c, const NoiseModel& n) {
  if (c.bands != y.bands)
    fail("apply_degradation: SRF has " + std::to_string(c.bands) + " bands but cube has " +
         std::to_string(y.bands));
  const std::int64_t hw = y.pixels();
  RGBImage x(y.height, y.width);
  for (int ch = 0; ch < 3; ++ch) {
    double* xrow = x.data.data() + static_cast<size_t>(ch) * hw;
    for (int b = 0; b < y.bands; ++b) {
      const double w = c.at(ch, b);
      const double* yrow = y.data.data() + static_cast<size_t>(b) * hw;
      for (std::int64_t p = 0; p < hw; ++p) xrow[p] += w * yrow[p];
    }
  }
  if (n.kind == NoiseKind::gaussian) {
    Rng rng(n.seed);
    for (double& v : x.data) v += rng.normal(0.0, n.sigma);
  }
  return x;
}

RGBImage gray_world_balance(const RGBImage& x) {
  const std::int64_t hw = x.pixels();
  double channel_mean[3];
  double global = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    double acc = 0.0;
    const double* row = x.data.data() + static_cast<size_t>(ch) * hw;
    for (std::int64_t p = 0; p < hw; ++p) acc += row[p];
    channel_mean[ch] = acc / static_cast<double>(hw);
    if (channel_mean[ch] <= 0.0)
      fail("gray_world_balance: channel " + std::to_string(ch) + " has non-positive mean");
    global += channel_mean[ch];
  }
  global /= 3.0;
  RGBImage out(x.height, x.width);
  for (int ch = 0; ch < 3; ++ch) {
    const double scale = global / channel_mean[ch];
    const double* src = x.data.data() + static_cast<size_t>(ch) * hw;
    double* dst = out.data.data() + static_cast<size_t>(ch) * hw;
    for (std::int64_t p = 0; p < hw; ++p) dst[p] = scale * src[p];
  }
  return out;
}

double psnr(const HSImage& a, const HSImage& b, double peak) {
  check_same_shape(a, b, "psnr");
  if (peak <= 0.0) fail("psnr: peak must be positive");
  double sq = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sq += d * d;
  }
  const double mse = sq / static_cast<double>(a.data.size());
  if (mse == 0.0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(peak * peak / mse));
}

namespace {

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<size_t>(size) * size);
  const double c = (size - 1) / 2.0;
  double sum = 0.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double d2 = (y - c) * (y - c) + (x - c) * (x - c);
      w[static_cast<size_t>(y) * size + x] = std::exp(-d2 / (2.0 * sigma * sigma));
      sum += w[static_cast<size_t>(y) * size + x];
    }
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace

double assim(const HSImage& a, const HSImage& b, const SsimParams& params) {
  check_same_shape(a, b, "assim");
  const int win = params.window;
  if (a.height < win || a.width < win)
    fail("assim: image " + std::to_string(a.height) + "x" + std::to_string(a.width) +
         " smaller than the " + std::to_string(win) + "x" + std::to_string(win) + " window");
  const std::vector<double> w = gaussian_window(win, params.sigma);
  const double c1 = params.k1 * params.dynamic_range * params.k1 * params.dynamic_range;
  const double c2 = params.k2 * params.dynamic_range * params.k2 * params.dynamic_range;
  const int oh = a.height - win + 1;
  const int ow = a.width - win + 1;

  double band_sum = 0.0;
  for (int band = 0; band < a.bands; ++band) {
    double ssim_sum = 0.0;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double mu1 = 0.0, mu2 = 0.0, s11 = 0.0, s22 = 0.0, s12 = 0.0;
        for (int dy = 0; dy < win; ++dy)
          for (int dx = 0; dx < win; ++dx) {
            const double wt = w[static_cast<size_t>(dy) * win + dx];
            const double v1 = a.at(band, oy + dy, ox + dx);
            const double v2 = b.at(band, oy + dy, ox + dx);
            mu1 += wt * v1;
            mu2 += wt * v2;
            s11 += wt * v1 * v1;
            s22 += wt * v2 * v2;
            s12 += wt * v1 * v2;
          }
        const double var1 = s11 - mu1 * mu1;
        const double var2 = s22 - mu2 * mu2;
        const double cov = s12 - mu1 * mu2;
        ssim_sum += ((2.0 * mu1 * mu2 + c1) * (2.0 * cov + c2)) /
                    ((mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2));
      }
    }
    band_sum += ssim_sum / (static_cast<double>(oh) * ow);
  }
  return band_sum / a.bands;
}

double sam(const HSImage& a, const HSImage& b, int* skipped_pixels) {
  check_same_shape(a, b, "sam");
  const std::int64_t hw = a.pixels();
  const int s = a.bands;
  double angle_sum = 0.0;
  std::int64_t counted = 0, skipped = 0;
  for (std::int64_t p = 0; p < hw; ++p) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int band = 0; band < s; ++band) {
      const double va = a.data[static_cast<size_t>(band) * hw + p];
      const double vb = b.data[static_cast<size_t>(band) * hw + p];
      dot += va * vb;
      na += va * va;
      nb += vb * vb;
    }
    if (na == 0.0 || nb == 0.0) {
      ++skipped;
      continue;
    }
    double cosv = dot / (std::sqrt(na) * std::sqrt(nb));
    cosv = std::min(1.0, std::max(-1.0, cosv));
    angle_sum += std::acos(cosv);
    ++counted;
  }
  if (skipped_pixels) *skipped_pixels = static_cast<int>(skipped);
  if (counted == 0) fail("sam: every pixel has a zero spectrum");
  return angle_sum / static_cast<double>(counted) * (180.0 / 3.14159265358979323846);
}

namespace {

// Keys cubic convolution kernel, a = -0.5.
double cubic_kernel(double t) {
  const double a = -0.5;
  const double x = std::fabs(t);
  if (x <= 1.0) return (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0;
  if (x < 2.0) return a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a;
  return 0.0;
}

}  // namespace

HSImage spectral_bicubic(const RGBImage& x, int bands) {
  if (bands < 2) fail("spectral_bicubic: need at least 2 output bands");
  HSImage out(bands, x.height, x.width);
  const std::int64_t hw = x.pixels();
  // Wavelength-ascending sample order along the band axis: B, G, R.
  const int src_ch[3] = {2, 1, 0};
  for (int band = 0; band < bands; ++band) {
    const double u = static_cast<double>(band) * 2.0 / (bands - 1);  // in [0, 2]
    double wsum[3] = {0, 0, 0};
    for (int j = -1; j <= 3; ++j) {
      const double k = cubic_kernel(u - j);
      if (k == 0.0) continue;
      const int sample = std::min(2, std::max(0, j));  // replicate ends
      wsum[sample] += k;
    }
    double* orow = out.data.data() + static_cast<size_t>(band) * hw;
    for (int si = 0; si < 3; ++si) {
      if (wsum[si] == 0.0) continue;
      const double* src = x.data.data() + static_cast<size_t>(src_ch[si]) * hw;
      for (std::int64_t p = 0; p < hw; ++p) orow[p] += wsum[si] * src[p];
    }
  }
  return out;
}

}  // namespace hsr
