#ifndef ECC_PAYLOAD_H
#define ECC_PAYLOAD_H

#include <systemc>

struct ecc_frame {
    sc_dt::sc_logic enable;
    sc_dt::sc_logic mode_word;
    sc_dt::sc_logic check_mode;
    sc_dt::sc_logic parity_in;
    sc_dt::sc_logic parity_out;
    sc_dt::sc_logic error_flag;
    sc_dt::sc_logic done;
    sc_dt::sc_bv<16> data_in;
    sc_dt::sc_bv<16> data_out;
    sc_dt::sc_bv<8> status;
};

#endif  /* ECC_PAYLOAD_H */
