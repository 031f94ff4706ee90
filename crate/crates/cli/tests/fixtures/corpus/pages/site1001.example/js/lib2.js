// lib 2
window.v0 = 0;
window.v1 = 31;
window.v2 = 62;
window.v3 = 93;
window.v4 = 124;
window.v5 = 155;
window.v6 = 186;
window.v7 = 217;
window.v8 = 248;
window.v9 = 279;
window.v10 = 310;
window.v11 = 341;
window.v12 = 372;
window.v13 = 403;
window.v14 = 434;
window.v15 = 465;
window.v16 = 496;
window.v17 = 527;
window.v18 = 558;
window.v19 = 589;
window.v20 = 620;
window.v21 = 651;
window.v22 = 682;
window.v23 = 713;
window.v24 = 744;
window.v25 = 775;
window.v26 = 806;
window.v27 = 837;
window.v28 = 868;
window.v29 = 899;
window.v30 = 930;
window.v31 = 961;
window.v32 = 992;
window.v33 = 26;
window.v34 = 57;
window.v35 = 88;
window.v36 = 119;
window.v37 = 150;
window.v38 = 181;
window.v39 = 212;
window.v40 = 243;
window.v41 = 274;
window.v42 = 305;
window.v43 = 336;
window.v44 = 367;
window.v45 = 398;
window.v46 = 429;
window.v47 = 460;
window.v48 = 491;
window.v49 = 522;
window.v50 = 553;
window.v51 = 584;
window.v52 = 615;
window.v53 = 646;
window.v54 = 677;
window.v55 = 708;
window.v56 = 739;
window.v57 = 770;
window.v58 = 801;
window.v59 = 832;
window.v60 = 863;
window.v61 = 894;
window.v62 = 925;
window.v63 = 956;
window.v64 = 987;
window.v65 = 21;
window.v66 = 52;
window.v67 = 83;
window.v68 = 114;
window.v69 = 145;
window.v70 = 176;
window.v71 = 207;
window.v72 = 238;
window.v73 = 269;
window.v74 = 300;
window.v75 = 331;
window.v76 = 362;
window.v77 = 393;
window.v78 = 424;
window.v79 = 455;
window.v80 = 486;
window.v81 = 517;
window.v82 = 548;
window.v83 = 579;
window.v84 = 610;
window.v85 = 641;
window.v86 = 672;
window.v87 = 703;
window.v88 = 734;
window.v89 = 765;
window.v90 = 796;
window.v91 = 827;
window.v92 = 858;
window.v93 = 889;
window.v94 = 920;
window.v95 = 951;
window.v96 = 982;
window.v97 = 16;
window.v98 = 47;
window.v99 = 78;
window.v100 = 109;
window.v101 = 140;
window.v102 = 171;
window.v103 = 202;
window.v104 = 233;
window.v105 = 264;
window.v106 = 295;
window.v107 = 326;
window.v108 = 357;
window.v109 = 388;
window.v110 = 419;
window.v111 = 450;
window.v112 = 481;
window.v113 = 512;
window.v114 = 543;
window.v115 = 574;
window.v116 = 605;
window.v117 = 636;
window.v118 = 667;
window.v119 = 698;
window.v120 = 729;
window.v121 = 760;
window.v122 = 791;
window.v123 = 822;
window.v124 = 853;
window.v125 = 884;
window.v126 = 915;
window.v127 = 946;
window.v128 = 977;
window.v129 = 11;
window.v130 = 42;
window.v131 = 73;
window.v132 = 104;
window.v133 = 135;
window.v134 = 166;
window.v135 = 197;
window.v136 = 228;
window.v137 = 259;
window.v138 = 290;
window.v139 = 321;
window.v140 = 352;
window.v141 = 383;
window.v142 = 414;
window.v143 = 445;
window.v144 = 476;
window.v145 = 507;
window.v146 = 538;
window.v147 = 569;
window.v148 = 600;
window.v149 = 631;
window.v150 = 662;
window.v151 = 693;
window.v152 = 724;
window.v153 = 755;
window.v154 = 786;
window.v155 = 817;
window.v156 = 848;
window.v157 = 879;
window.v158 = 910;
window.v159 = 941;
window.v160 = 972;
window.v161 = 6;
window.v162 = 37;
window.v163 = 68;
window.v164 = 99;
window.v165 = 130;
window.v166 = 161;
window.v167 = 192;
window.v168 = 223;
window.v169 = 254;
window.v170 = 285;
window.v171 = 316;
window.v172 = 347;
window.v173 = 378;
window.v174 = 409;
window.v175 = 440;
window.v176 = 471;
window.v177 = 502;
window.v178 = 533;
window.v179 = 564;
window.v180 = 595;
window.v181 = 626;
window.v182 = 657;
window.v183 = 688;
window.v184 = 719;
window.v185 = 750;
window.v186 = 781;
window.v187 = 812;
window.v188 = 843;
window.v189 = 874;
window.v190 = 905;
window.v191 = 936;
window.v192 = 967;
window.v193 = 1;
window.v194 = 32;
window.v195 = 63;
window.v196 = 94;
window.v197 = 125;
window.v198 = 156;
window.v199 = 187;
window.v200 = 218;
window.v201 = 249;
window.v202 = 280;
window.v203 = 311;
window.v204 = 342;
window.v205 = 373;
window.v206 = 404;
window.v207 = 435;
window.v208 = 466;
window.v209 = 497;
window.v210 = 528;
window.v211 = 559;
window.v212 = 590;
window.v213 = 621;
window.v214 = 652;
window.v215 = 683;
window.v216 = 714;
windo