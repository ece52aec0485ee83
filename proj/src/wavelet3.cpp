#include "gf/wavelet3.hpp"

namespace gf {

const char* subband_name(int band) {
  static const char* names[8] = {"LLL", "LLH", "LHL", "LHH", "HLL", "HLH", "HHL", "HHH"};
  return (band >= 0 && band < 8) ? names[band] : "???";
}

}  // namespace gf
